#![allow(dead_code)]

pub mod grad_probes;
pub mod invariants;
pub mod oracle;
