use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMode {
    /// Every query scans the embedding table (`O(d·|V|)` per query).
    #[default]
    Live,
    /// Nearest neighbours for all items are computed once up front.
    Precomputed,
}

/// Nearest real item by embedding dot product, excluding the query item,
/// padding and the mask token. Ties go to the smaller id.
pub struct ItemSimilarityIndex<'a> {
    table: &'a Matrix,
    num_items: usize,
    precomputed: Option<Vec<usize>>,
    queries: AtomicUsize,
}

impl<'a> ItemSimilarityIndex<'a> {
    /// `table` has `num_items + 2` rows (padding, items, mask).
    pub fn new(table: &'a Matrix, num_items: usize, mode: IndexMode) -> Result<Self> {
        if num_items < 2 {
            return Err(Error::config("similarity index needs at least two items"));
        }
        if table.rows() < num_items + 1 {
            return Err(Error::config("embedding table smaller than the catalog"));
        }
        let mut index = Self {
            table,
            num_items,
            precomputed: None,
            queries: AtomicUsize::new(0),
        };
        if mode == IndexMode::Precomputed {
            let all = (1..=num_items).map(|i| index.scan(i)).collect();
            index.precomputed = Some(all);
        }
        Ok(index)
    }

    fn scan(&self, item: usize) -> usize {
        let q = self.table.row(item);
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for j in 1..=self.num_items {
            if j == item {
                continue;
            }
            let s = dot(q, self.table.row(j));
            if s > best_score {
                best_score = s;
                best = j;
            }
        }
        best
    }

    /// Most similar other item to `item` (which must be in `[1, |V|]`).
    pub fn nearest(&self, item: usize) -> usize {
        assert!(
            (1..=self.num_items).contains(&item),
            "nearest() on non-item id {item}"
        );
        self.queries.fetch_add(1, Ordering::Relaxed);
        match &self.precomputed {
            Some(all) => all[item - 1],
            None => self.scan(item),
        }
    }

    /// Similarity queries served so far.
    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }
}
