use serde::{Deserialize, Serialize};

/// Work categories tracked separately in the cost ledger, mirroring the
/// phases of the solvers: the two sparse products, Gram-matrix formation,
/// dense gradient arithmetic, the three communication phases, and buffer
/// management.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CostCategory {
    Spmv,
    Gram,
    Gradient,
    SstepComm,
    FedavgComm,
    SgdComm,
    MemoryMgmt,
}

pub const ALL_CATEGORIES: [CostCategory; 7] = [
    CostCategory::Spmv,
    CostCategory::Gram,
    CostCategory::Gradient,
    CostCategory::SstepComm,
    CostCategory::FedavgComm,
    CostCategory::SgdComm,
    CostCategory::MemoryMgmt,
];

impl CostCategory {
    pub fn name(&self) -> &'static str {
        match self {
            CostCategory::Spmv => "spmv",
            CostCategory::Gram => "gram",
            CostCategory::Gradient => "gradient",
            CostCategory::SstepComm => "sstep_comm",
            CostCategory::FedavgComm => "fedavg_comm",
            CostCategory::SgdComm => "sgd_comm",
            CostCategory::MemoryMgmt => "memory_mgmt",
        }
    }

    fn index(&self) -> usize {
        ALL_CATEGORIES.iter().position(|c| c == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounters {
    pub flops: u64,
    pub transcendental_ops: u64,
    pub words_moved: u64,
    pub messages: u64,
}

impl CategoryCounters {
    fn add(&mut self, other: &CategoryCounters) {
        self.flops += other.flops;
        self.transcendental_ops += other.transcendental_ops;
        self.words_moved += other.words_moved;
        self.messages += other.messages;
    }

    fn max(&self, other: &CategoryCounters) -> CategoryCounters {
        CategoryCounters {
            flops: self.flops.max(other.flops),
            transcendental_ops: self.transcendental_ops.max(other.transcendental_ops),
            words_moved: self.words_moved.max(other.words_moved),
            messages: self.messages.max(other.messages),
        }
    }
}

/// Exact operation counts for one processor (or one critical path), broken
/// down by category. Counting rules: a sparse matrix-vector product charges
/// 2 flops per nonzero, dense scale/axpy work charges 1 flop per multiply or
/// add, a sigmoid evaluation charges 2 flops plus 1 transcendental, Gram
/// entries charge 2 flops per matched index pair actually multiplied, and
/// zeroing an accumulation buffer charges 1 memory-management flop per word.
/// A collective over a team of size p charges its vector length in words and
/// 2*ceil(log2 p) messages to every participant; single-member teams charge
/// nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    counters: [CategoryCounters; 7],
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_flops(&mut self, category: CostCategory, amount: u64) {
        self.counters[category.index()].flops += amount;
    }

    pub fn record_transcendental(&mut self, category: CostCategory, amount: u64) {
        self.counters[category.index()].transcendental_ops += amount;
    }

    pub fn record_comm(&mut self, category: CostCategory, words: u64, messages: u64) {
        let c = &mut self.counters[category.index()];
        c.words_moved += words;
        c.messages += messages;
    }

    pub fn category(&self, category: CostCategory) -> &CategoryCounters {
        &self.counters[category.index()]
    }

    fn total<F: Fn(&CategoryCounters) -> u64>(&self, f: F) -> u64 {
        self.counters.iter().map(f).sum()
    }

    pub fn flops(&self) -> u64 {
        self.total(|c| c.flops)
    }

    pub fn transcendental_ops(&self) -> u64 {
        self.total(|c| c.transcendental_ops)
    }

    pub fn words_moved(&self) -> u64 {
        self.total(|c| c.words_moved)
    }

    pub fn messages(&self) -> u64 {
        self.total(|c| c.messages)
    }

    /// Element-wise maximum per category, the critical-path combiner.
    pub fn max_merge(&self, other: &CostLedger) -> CostLedger {
        let mut out = CostLedger::new();
        for (i, (a, b)) in self.counters.iter().zip(&other.counters).enumerate() {
            out.counters[i] = a.max(b);
        }
        out
    }

    /// Element-wise sum per category.
    pub fn add(&mut self, other: &CostLedger) {
        for (i, c) in other.counters.iter().enumerate() {
            self.counters[i].add(c);
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,flops,transcendental_ops,words_moved,messages\n");
        for cat in ALL_CATEGORIES {
            let c = self.category(cat);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                cat.name(),
                c.flops,
                c.transcendental_ops,
                c.words_moved,
                c.messages
            ));
        }
        out.push_str(&format!(
            "total,{},{},{},{}\n",
            self.flops(),
            self.transcendental_ops(),
            self.words_moved(),
            self.messages()
        ));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut categories = serde_json::Map::new();
        for cat in ALL_CATEGORIES {
            categories.insert(cat.name().to_string(), serde_json::to_value(self.category(cat)).unwrap());
        }
        serde_json::json!({
            "categories": categories,
            "totals": {
                "flops": self.flops(),
                "transcendental_ops": self.transcendental_ops(),
                "words_moved": self.words_moved(),
                "messages": self.messages(),
            }
        })
    }
}

/// Ledgers from a distributed run: one per rank for inspection, plus the
/// critical-path aggregate (per-category maximum over ranks, so concurrent
/// team collectives are charged once, not once per team member).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLedger {
    pub per_rank: Vec<CostLedger>,
    pub critical: CostLedger,
}

impl RunLedger {
    pub fn merge(per_rank: Vec<CostLedger>) -> Self {
        assert!(!per_rank.is_empty(), "cannot merge zero ledgers");
        let critical = per_rank[1..]
            .iter()
            .fold(per_rank[0].clone(), |acc, l| acc.max_merge(l));
        RunLedger { per_rank, critical }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "critical": self.critical.to_json(),
            "per_rank": self.per_rank.iter().map(|l| l.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// Machine parameters of the linear cost model: seconds per message
/// (`alpha`), per word (`beta`), and per flop (`gamma`), with transcendental
/// operations weighted `transcendental_weight` times a flop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_transcendental_weight")]
    pub transcendental_weight: f64,
}

fn default_transcendental_weight() -> f64 {
    4.0
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { alpha: 0.0, beta: 0.0, gamma: 0.0, transcendental_weight: 4.0 }
    }
}

/// Modeled runtime of a ledger under the linear cost model:
/// gamma * (F + weight * transcendental) + alpha * messages + beta * words.
pub fn hockney_time(ledger: &CostLedger, params: &CostParams) -> f64 {
    params.gamma
        * (ledger.flops() as f64 + params.transcendental_weight * ledger.transcendental_ops() as f64)
        + params.alpha * ledger.messages() as f64
        + params.beta * ledger.words_moved() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_sum_to_totals() {
        let mut l = CostLedger::new();
        l.record_flops(CostCategory::Spmv, 200);
        l.record_flops(CostCategory::Gradient, 50);
        l.record_transcendental(CostCategory::Gradient, 16);
        l.record_comm(CostCategory::SgdComm, 300, 6);
        assert_eq!(l.flops(), 250);
        assert_eq!(l.transcendental_ops(), 16);
        assert_eq!(l.words_moved(), 300);
        assert_eq!(l.messages(), 6);
    }

    #[test]
    fn merge_keeps_per_rank_and_takes_maxima() {
        let mut a = CostLedger::new();
        a.record_flops(CostCategory::Spmv, 10);
        a.record_comm(CostCategory::SgdComm, 8, 2);
        let mut b = CostLedger::new();
        b.record_flops(CostCategory::Spmv, 12);
        b.record_comm(CostCategory::SgdComm, 8, 2);
        let merged = RunLedger::merge(vec![a.clone(), b.clone()]);
        assert_eq!(merged.per_rank, vec![a.clone(), b]);
        assert_eq!(merged.critical.flops(), 12);
        assert_eq!(merged.critical.words_moved(), 8);
        // merging identical ledgers reproduces the ledger
        let same = RunLedger::merge(vec![a.clone(), a.clone()]);
        assert_eq!(same.critical, a);
    }

    #[test]
    fn modeled_time_weighs_each_term() {
        let mut l = CostLedger::new();
        l.record_flops(CostCategory::Spmv, 1000);
        l.record_comm(CostCategory::SgdComm, 500, 10);
        let params =
            CostParams { alpha: 1e-6, beta: 1e-9, gamma: 1e-9, transcendental_weight: 4.0 };
        let t = hockney_time(&l, &params);
        assert!((t - 1.15e-5).abs() < 1e-18, "got {t}");

        // transcendental weight applies to transcendental ops only
        l.record_transcendental(CostCategory::Gradient, 100);
        let t2 = hockney_time(&l, &params);
        assert!((t2 - (1.15e-5 + 4.0 * 100.0 * 1e-9)).abs() < 1e-18);
    }

    #[test]
    fn relative_ranking_depends_on_alpha() {
        // few large messages vs many small ones
        let mut bulk = CostLedger::new();
        bulk.record_comm(CostCategory::SgdComm, 10_000, 4);
        let mut chatty = CostLedger::new();
        chatty.record_comm(CostCategory::SgdComm, 100, 400);
        let latency_bound =
            CostParams { alpha: 1e-3, beta: 1e-9, gamma: 0.0, transcendental_weight: 4.0 };
        let bandwidth_bound =
            CostParams { alpha: 1e-9, beta: 1e-6, gamma: 0.0, transcendental_weight: 4.0 };
        assert!(hockney_time(&bulk, &latency_bound) < hockney_time(&chatty, &latency_bound));
        assert!(hockney_time(&bulk, &bandwidth_bound) > hockney_time(&chatty, &bandwidth_bound));
    }

    #[test]
    fn csv_lists_every_category_and_total() {
        let out = CostLedger::new().to_csv();
        assert_eq!(out.lines().count(), 9);
        assert!(out.lines().any(|l| l.starts_with("sstep_comm,")));
        assert!(out.ends_with("total,0,0,0,0\n"));
    }
}
