//! Invariant checks for every augmentation operator, shared by the property
//! suites and the acceptance run.

use rand::Rng;

use seqtta::augment::ops::{
    combo, crop, insert, mask, reorder, sliding_window_sample, sliding_windows, substitute,
    tmask_r, ComboMember, CMRSI_POOL, CMR_POOL,
};
use seqtta::augment::repr::{tmask_b, tnoise};
use seqtta::augment::{floor_count, operated_count, select_positions};
use seqtta::augment::{IndexMode, ItemSimilarityIndex, SelectionPolicy};
use seqtta::rng::seeded;
use seqtta::tensor::{dot, Matrix};

pub const OPERATORS: [&str; 11] = [
    "crop",
    "reorder",
    "sliding-window",
    "mask",
    "substitute",
    "insert",
    "tnoise",
    "tmask-b",
    "tmask-r",
    "cmr",
    "cmrsi",
];

pub const NUM_ITEMS: usize = 40;
pub const MASK_ID: usize = NUM_ITEMS + 1;

/// Embedding table with rows for padding, items and mask.
pub fn table(seed: u64) -> Matrix {
    Matrix::random_uniform(NUM_ITEMS + 2, 6, 1.0, &mut seeded(seed))
}

pub fn brute_nearest(table: &Matrix, item: usize) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for j in 1..=NUM_ITEMS {
        if j == item {
            continue;
        }
        let s = dot(table.row(item), table.row(j));
        if s > best_score || (s == best_score && j < best) {
            best_score = s;
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Case {
    pub seq: Vec<usize>,
    pub ratio: f64,
    pub keys: Vec<usize>,
    pub policy: SelectionPolicy,
    pub max_len: usize,
    pub seed: u64,
}

impl Case {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let n = rng.gen_range(1..=30);
        let seq: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=NUM_ITEMS)).collect();
        let ratio = rng.gen_range(0.05..=1.0);
        let mut keys: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        keys.truncate((n / 2).max(1));
        let policy = match rng.gen_range(0..4) {
            0 => SelectionPolicy::Random,
            1 => SelectionPolicy::KeyFirst,
            2 => SelectionPolicy::NonKeyFirst,
            _ => SelectionPolicy::FixedProportion { p: rng.gen_range(0.0..=1.0) },
        };
        let max_len = rng.gen_range(n..=n + 20);
        Self {
            seq,
            ratio,
            keys,
            policy,
            max_len,
            seed: rng.gen(),
        }
    }
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn is_infix(hay: &[usize], needle: &[usize]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

fn is_subsequence(hay: &[usize], needle: &[usize]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == x))
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Positions the policy must favour: `count` picks contain at least this
/// many keys (KeyFirst), non-keys (NonKeyFirst) or exactly this many keys
/// (FixedProportion, before top-up).
fn check_selection(case: &Case, picked: &[usize], count: usize) -> Result<(), String> {
    let n = case.seq.len();
    ensure(picked.len() == count, || format!("picked {} of {count}", picked.len()))?;
    ensure(picked.windows(2).all(|w| w[0] < w[1]), || "positions not distinct/ascending".into())?;
    ensure(picked.iter().all(|&p| p < n), || "position out of range".into())?;
    let keys_in = picked.iter().filter(|p| case.keys.contains(p)).count();
    let k = case.keys.len();
    match case.policy {
        SelectionPolicy::Random => Ok(()),
        SelectionPolicy::KeyFirst => ensure(keys_in == count.min(k), || {
            format!("key-first took {keys_in} keys, expected {}", count.min(k))
        }),
        SelectionPolicy::NonKeyFirst => ensure(count - keys_in == count.min(n - k), || {
            format!("non-key-first took {} non-keys", count - keys_in)
        }),
        SelectionPolicy::FixedProportion { p } => {
            let want = floor_count(p, count).min(k);
            let want = want + (count - want).saturating_sub(n - k);
            ensure(keys_in == want, || format!("fixed proportion took {keys_in} keys, expected {want}"))
        }
    }
}

fn check_mask(case: &Case, out: &[usize], count: usize, policy_checked: bool) -> Result<(), String> {
    ensure(out.len() == case.seq.len(), || "mask changed length".into())?;
    let picked: Vec<usize> = (0..out.len()).filter(|&i| out[i] == MASK_ID).collect();
    ensure(
        (0..out.len()).all(|i| out[i] == MASK_ID || out[i] == case.seq[i]),
        || "mask altered an unselected item".into(),
    )?;
    if policy_checked {
        check_selection(case, &picked, count)
    } else {
        ensure(picked.len() == count, || format!("masked {} of {count}", picked.len()))
    }
}

fn check_substitute(case: &Case, out: &[usize], t: &Matrix, count: usize, policy_checked: bool) -> Result<(), String> {
    ensure(out.len() == case.seq.len(), || "substitute changed length".into())?;
    let changed: Vec<usize> = (0..out.len()).filter(|&i| out[i] != case.seq[i]).collect();
    for &i in &changed {
        ensure(out[i] == brute_nearest(t, case.seq[i]), || format!("position {i} not the nearest item"))?;
    }
    ensure(out.iter().all(|&x| (1..=NUM_ITEMS).contains(&x)), || "substitute left the catalog".into())?;
    if policy_checked {
        check_selection(case, &changed, count)
    } else {
        ensure(changed.len() == count, || format!("substituted {} of {count}", changed.len()))
    }
}

/// Whether `out[i..]` is `seq[j..]` with inserted items, each the nearest
/// neighbour of the original item before it; `ins` counts insertions.
#[allow(clippy::too_many_arguments)]
fn insert_walk(out: &[usize], seq: &[usize], t: &Matrix, i: usize, j: usize, can_insert: bool, ins: usize, max_ins: usize, exact: bool) -> bool {
    if i == out.len() {
        return j == seq.len() && (!exact || ins == max_ins);
    }
    if j < seq.len() && out[i] == seq[j] && insert_walk(out, seq, t, i + 1, j + 1, true, ins, max_ins, exact) {
        return true;
    }
    can_insert && ins < max_ins && out[i] == brute_nearest(t, seq[j - 1])
        && insert_walk(out, seq, t, i + 1, j, false, ins + 1, max_ins, exact)
}

fn check_insert(case: &Case, out: &[usize], t: &Matrix, count: usize, max_len: usize) -> Result<(), String> {
    let n = case.seq.len();
    let want = (n + count).min(max_len);
    ensure(out.len() == want, || format!("insert length {} expected {want}", out.len()))?;
    let ok = if n + count <= max_len {
        insert_walk(out, &case.seq, t, 0, 0, false, 0, count, true)
    } else {
        // the kept window may start anywhere, possibly on an inserted item
        (0..=n).any(|j| {
            insert_walk(out, &case.seq, t, 0, j, false, 0, count, false)
                || (j > 0 && out[0] == brute_nearest(t, case.seq[j - 1])
                    && insert_walk(out, &case.seq, t, 1, j, false, 1, count, false))
        })
    };
    ensure(ok, || format!("{out:?} is not an insertion of the original"))
}

fn check_crop(case: &Case, out: &[usize]) -> Result<(), String> {
    let want = operated_count(case.ratio, case.seq.len());
    ensure(out.len() == want, || format!("crop length {} expected {want}", out.len()))?;
    ensure(is_infix(&case.seq, out), || "crop is not a contiguous slice".into())
}

fn check_reorder(case: &Case, out: &[usize]) -> Result<(), String> {
    ensure(sorted(out) == sorted(&case.seq), || "reorder changed the multiset".into())?;
    let diff: Vec<usize> = (0..out.len()).filter(|&i| out[i] != case.seq[i]).collect();
    if let (Some(a), Some(b)) = (diff.first(), diff.last()) {
        let w = operated_count(case.ratio, case.seq.len());
        ensure(b - a < w, || format!("reorder touched span {} > window {w}", b - a + 1))?;
    }
    Ok(())
}

fn check_member(case: &Case, member: ComboMember, out: &[usize], t: &Matrix) -> Result<(), String> {
    let count = operated_count(case.ratio, case.seq.len());
    match member {
        ComboMember::Crop => check_crop(case, out),
        ComboMember::Reorder => check_reorder(case, out),
        ComboMember::Mask => check_mask(case, out, count, false),
        ComboMember::Substitute => check_substitute(case, out, t, count, false),
        ComboMember::Insert => check_insert(case, out, t, count, case.max_len),
    }
}

/// Runs `op` on `case` and checks its invariants.
pub fn check_case(op: &str, case: &Case, t: &Matrix) -> Result<(), String> {
    let mut rng = seeded(case.seed);
    let n = case.seq.len();
    let count = operated_count(case.ratio, n);
    let index = ItemSimilarityIndex::new(t, NUM_ITEMS, IndexMode::Live).map_err(|e| e.to_string())?;
    let keys = Some(case.keys.as_slice());
    let err = |e: seqtta::Error| e.to_string();
    match op {
        "crop" => check_crop(case, &crop(&case.seq, case.ratio, &mut rng)),
        "reorder" => check_reorder(case, &reorder(&case.seq, case.ratio, &mut rng)),
        "sliding-window" => {
            let window = 1 + (case.ratio * 10.0) as usize;
            let out = sliding_window_sample(&case.seq, window, &mut rng);
            ensure(out.len() == window.min(n), || "window length".into())?;
            ensure(is_infix(&case.seq, &out), || "window not contiguous".into())?;
            let all = sliding_windows(&case.seq, window);
            let want = if window >= n { 1 } else { n - window + 1 };
            ensure(all.len() == want, || format!("{} windows, expected {want}", all.len()))?;
            ensure(all.contains(&out), || "sample not among the windows".into())
        }
        "mask" => {
            let out = mask(&case.seq, case.ratio, MASK_ID, &case.policy, keys, &mut rng).map_err(err)?;
            check_mask(case, &out, count, true)
        }
        "substitute" => {
            let out = substitute(&case.seq, case.ratio, &index, &case.policy, keys, &mut rng).map_err(err)?;
            check_substitute(case, &out, t, count, true)?;
            let mut again = seeded(case.seed);
            let picked = select_positions(n, count, &case.policy, keys, &mut again).map_err(err)?;
            let changed: Vec<usize> = (0..n).filter(|&i| out[i] != case.seq[i]).collect();
            ensure(picked == changed, || "substituted positions differ from the selection".into())
        }
        "insert" => {
            let out = insert(&case.seq, case.ratio, &index, &case.policy, keys, case.max_len, &mut rng)
                .map_err(err)?;
            check_insert(case, &out, t, count, case.max_len)
        }
        "tnoise" => {
            let rows = n;
            let rep = Matrix::random_uniform(rows, 4, 1.0, &mut rng);
            let padding: Vec<bool> = (0..rows).map(|i| i < rows / 3).collect();
            let lo = case.ratio - 0.5;
            let hi = lo + case.ratio;
            let out = tnoise(&rep, lo, hi, Some(&padding), &mut rng);
            ensure(out.shape() == rep.shape(), || "tnoise changed shape".into())?;
            for r in 0..rows {
                for c in 0..4 {
                    let d = out.get(r, c) - rep.get(r, c);
                    if padding[r] {
                        ensure(d == 0.0, || "tnoise touched a padding row".into())?;
                    } else {
                        ensure(d >= lo - 1e-12 && d <= hi + 1e-12, || format!("noise {d} outside [{lo}, {hi}]"))?;
                    }
                }
            }
            Ok(())
        }
        "tmask-b" => {
            let rows = n;
            let rep = Matrix::random_uniform(rows, 4, 1.0, &mut rng);
            let padding: Vec<bool> = (0..rows).map(|i| i < rows / 3).collect();
            let real = padding.iter().filter(|p| !**p).count();
            let sigma = case.ratio.min(0.99);
            let (out, zeroed) = tmask_b(&rep, sigma, Some(&padding), &mut rng);
            ensure(zeroed.len() == operated_count(sigma, real), || "tmask-b row count".into())?;
            for r in 0..rows {
                if zeroed.contains(&r) {
                    ensure(!padding[r], || "tmask-b zeroed a padding row".into())?;
                    ensure(out.row(r).iter().all(|&v| v == 0.0), || "row not zeroed".into())?;
                } else {
                    ensure(out.row(r) == rep.row(r), || "unselected row changed".into())?;
                }
            }
            Ok(())
        }
        "tmask-r" => {
            let sigma = case.ratio.min(0.99);
            let out = tmask_r(&case.seq, sigma, &mut rng);
            let want = n - floor_count(sigma, n).min(n - 1);
            ensure(out.len() == want, || format!("tmask-r length {} expected {want}", out.len()))?;
            ensure(!out.is_empty(), || "tmask-r emptied the sequence".into())?;
            ensure(is_subsequence(&case.seq, &out), || "tmask-r is not a subsequence".into())
        }
        "cmr" | "cmrsi" => {
            let pool: &[ComboMember] = if op == "cmr" { &CMR_POOL } else { &CMRSI_POOL };
            let (member, out) =
                combo(&case.seq, pool, case.ratio, MASK_ID, Some(&index), case.max_len, &mut rng).map_err(err)?;
            ensure(pool.contains(&member), || "member outside the pool".into())?;
            check_member(case, member, &out, t)
        }
        other => Err(format!("unknown operator {other}")),
    }
}

/// `cases` random cases for `op`; returns the failures.
pub fn run_operator(op: &str, cases: usize, seed: u64) -> Vec<String> {
    let mut rng = seeded(seed);
    let t = table(seed ^ 0x5eed);
    (0..cases)
        .filter_map(|i| {
            let case = Case::random(&mut rng);
            check_case(op, &case, &t).err().map(|e| format!("{op} case {i}: {e} ({case:?})"))
        })
        .collect()
}
