use std::collections::HashMap;

use log::warn;

use super::Interaction;

/// Iteratively drops users and items with fewer than `k` interactions until
/// every remaining user and item has at least `k`. Input order is kept.
pub fn k_core_filter(interactions: &[Interaction], k: usize) -> Vec<Interaction> {
    assert!(k >= 1, "k must be at least 1");
    let mut user_ids: HashMap<&str, usize> = HashMap::new();
    let mut item_ids: HashMap<&str, usize> = HashMap::new();
    let rows: Vec<(usize, usize)> = interactions
        .iter()
        .map(|x| {
            let n = user_ids.len();
            let u = *user_ids.entry(x.user.as_str()).or_insert(n);
            let n = item_ids.len();
            let i = *item_ids.entry(x.item.as_str()).or_insert(n);
            (u, i)
        })
        .collect();

    let mut alive = vec![true; rows.len()];
    let mut user_count = vec![0usize; user_ids.len()];
    let mut item_count = vec![0usize; item_ids.len()];
    for &(u, i) in &rows {
        user_count[u] += 1;
        item_count[i] += 1;
    }
    loop {
        let mut changed = false;
        for (idx, &(u, i)) in rows.iter().enumerate() {
            if alive[idx] && (user_count[u] < k || item_count[i] < k) {
                alive[idx] = false;
                user_count[u] -= 1;
                item_count[i] -= 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let out: Vec<Interaction> = interactions
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(x, _)| x.clone())
        .collect();
    if out.is_empty() && !interactions.is_empty() {
        warn!("{k}-core of {} interactions is empty", interactions.len());
    }
    out
}

/// True when every user and item in `interactions` appears at least `k` times.
pub fn is_k_core(interactions: &[Interaction], k: usize) -> bool {
    let mut users: HashMap<&str, usize> = HashMap::new();
    let mut items: HashMap<&str, usize> = HashMap::new();
    for x in interactions {
        *users.entry(&x.user).or_default() += 1;
        *items.entry(&x.item).or_default() += 1;
    }
    users.values().chain(items.values()).all(|&c| c >= k)
}
