//! Self-validation suites that compare closed forms against brute-force
//! enumeration or generic evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eppf::{integer_partitions, set_partition_count, Change, EppfKernel};
use crate::franchise::{
    coclustering_general, coclustering_probability, elicitation_check, frequency_array,
    joint_conditional, joint_conditional_generic, marginal_urn, marginal_urn_generic,
    peppf_log_mass_with_cap, urn_partition_masses, FranchiseState, PriorKernels, Seat,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Eppf,
    Peppf,
    Urns,
    Coclust,
    Elicit,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Eppf, Suite::Peppf, Suite::Urns, Suite::Coclust, Suite::Elicit];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Eppf => "eppf",
            Suite::Peppf => "peppf",
            Suite::Urns => "urns",
            Suite::Coclust => "coclust",
            Suite::Elicit => "elicit",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub cases: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub violations: usize,
    pub passed: bool,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {} cases, max abs error {:.3e} (tol {:.0e}), {} violations",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.cases,
            self.max_abs_error,
            self.tolerance,
            self.violations
        )
    }
}

/// A random fully allocated state with at most `max_profiles` profiles and
/// up to three subgroups per (layer, profile).
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, layer_sizes: &[usize], max_profiles: usize) -> FranchiseState {
    let layer_of: Vec<usize> = layer_sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect();
    let z: Vec<usize> = layer_of.iter().map(|_| rng.random_range(0..max_profiles.max(1))).collect();
    let w: Vec<usize> = z.iter().map(|&h| h * 3 + rng.random_range(0..3)).collect();
    FranchiseState::from_assignment(layer_of, layer_sizes.len(), &z, &w)
        .expect("subgroup labels determine profiles")
}

/// Random layer sizes (each at least 1) with `d ≤ max_d` and total `≤ max_v`.
pub fn random_layer_sizes<R: Rng + ?Sized>(rng: &mut R, max_d: usize, max_v: usize) -> Vec<usize> {
    let d = rng.random_range(1..=max_d);
    let mut sizes = vec![1; d];
    let extra = rng.random_range(0..=max_v.saturating_sub(d));
    for _ in 0..extra {
        sizes[rng.random_range(0..d)] += 1;
    }
    sizes
}

pub fn random_kernels<R: Rng + ?Sized>(rng: &mut R) -> PriorKernels {
    if rng.random_bool(0.5) {
        PriorKernels::hdp(rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)).unwrap()
    } else {
        PriorKernels::hnsp(rng.random_range(0.02..0.98), rng.random_range(0.02..0.98)).unwrap()
    }
}

struct Tally {
    cases: usize,
    err: f64,
    violations: usize,
}

impl Tally {
    fn new() -> Self {
        Self { cases: 0, err: 0.0, violations: 0 }
    }

    fn diff(&mut self, a: f64, b: f64) {
        self.cases += 1;
        let e = (a - b).abs();
        self.err = if e.is_nan() { f64::INFINITY } else { self.err.max(e) };
    }

    fn report(self, suite: Suite, tolerance: f64) -> CheckReport {
        CheckReport {
            suite,
            cases: self.cases,
            max_abs_error: self.err,
            tolerance,
            violations: self.violations,
            passed: self.err <= tolerance && self.violations == 0,
        }
    }
}

fn eppf_suite(max_n: usize) -> CheckReport {
    let kernels = [
        EppfKernel::dirichlet(0.5).unwrap(),
        EppfKernel::dirichlet(3.0).unwrap(),
        EppfKernel::stable(0.25).unwrap(),
        EppfKernel::stable(0.7).unwrap(),
    ];
    let mut t = Tally::new();
    for k in &kernels {
        let g = k.as_generic();
        for n in 1..=max_n {
            let mut total = 0.0;
            for p in integer_partitions(n) {
                let lp = k.log_phi(&p).unwrap();
                total += set_partition_count(&p) * lp.exp();
                t.diff(lp, g.log_phi(&p).unwrap());
                // addition rule: the one-step extensions of p sum to 1
                let mut step: f64 = (0..p.len())
                    .map(|i| k.log_ratio_add(&p, Change::Increment(i)).unwrap().exp())
                    .sum();
                step += k.log_ratio_add(&p, Change::NewCluster).unwrap().exp();
                t.diff(step, 1.0);
            }
            t.diff(total, 1.0);
        }
    }
    t.report(Suite::Eppf, 1e-10)
}

fn peppf_suite(max_n: usize) -> CheckReport {
    let mut t = Tally::new();
    let kernels = [PriorKernels::hdp(1.0, 1.0).unwrap(), PriorKernels::hnsp(0.5, 0.5).unwrap()];
    let shapes: Vec<Vec<usize>> = vec![vec![2, 2], vec![3, 2], vec![1, 1, 1]]
        .into_iter()
        .filter(|s: &Vec<usize>| s.iter().sum::<usize>() <= max_n)
        .collect();
    for k in &kernels {
        for sizes in &shapes {
            let layer_of: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
                .collect();
            let masses = urn_partition_masses(&layer_of, sizes.len(), k, max_n).unwrap();
            let mut direct_total = 0.0;
            let mut urn_total = 0.0;
            for (z, p) in &masses {
                let f = frequency_array(&layer_of, sizes.len(), z);
                let direct = peppf_log_mass_with_cap(&f, k, max_n).unwrap().exp();
                t.diff(direct, *p);
                direct_total += direct;
                urn_total += p;
            }
            t.diff(direct_total, 1.0);
            t.diff(urn_total, 1.0);
        }
    }
    t.report(Suite::Peppf, 1e-10)
}

fn urn_suite(seed: u64, states: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new();
    for _ in 0..states {
        let sizes = random_layer_sizes(&mut rng, 4, 30);
        let state = random_state(&mut rng, &sizes, 6);
        let k = random_kernels(&mut rng);
        let j = rng.random_range(0..sizes.len());
        let a = joint_conditional(&state, j, &k);
        let b = joint_conditional_generic(&state, j, &k);
        for (x, y) in a.existing.iter().zip(&b.existing) {
            t.diff(x.prob, y.prob);
        }
        for (x, y) in a.new_subgroup.iter().zip(&b.new_subgroup) {
            t.diff(*x, *y);
        }
        t.diff(a.total(), 1.0);
        for (x, y) in marginal_urn(&state, j, &k).iter().zip(marginal_urn_generic(&state, j, &k)) {
            t.diff(*x, y);
        }
    }
    t.report(Suite::Urns, 1e-12)
}

/// `P(z_v = z_u)` by conditioning on `v`'s seat and then reading `u`'s
/// marginal urn at `v`'s profile.
pub fn coclustering_chain_rule(state: &FranchiseState, j: usize, jp: usize, k: &PriorKernels) -> f64 {
    let mut s = state.clone();
    s.push_unassigned(&[j]).unwrap();
    let v = s.num_nodes() - 1;
    let table = joint_conditional(&s, j, k);
    let h_count = table.num_profiles();
    let seats = table
        .existing
        .iter()
        .map(|e| (Seat::Existing(e.subgroup), e.prob))
        .chain(
            table
                .new_subgroup
                .iter()
                .enumerate()
                .map(|(h, &p)| (Seat::NewSubgroup((h < h_count).then_some(h)), p)),
        )
        .collect::<Vec<_>>();
    let mut total = 0.0;
    for (seat, p) in seats {
        if p == 0.0 {
            continue;
        }
        let h = s.insert_node(v, seat).unwrap();
        total += p * marginal_urn(&s, jp, k)[h];
        s.remove_node(v).unwrap();
    }
    total
}

fn coclust_suite(seed: u64, states: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new();
    for i in 0..states {
        let sizes = random_layer_sizes(&mut rng, 4, 30);
        let mut state = random_state(&mut rng, &sizes, 6);
        if i % 10 == 0 {
            state = FranchiseState::empty(state.layers().to_vec(), sizes.len()).unwrap();
        }
        let k = random_kernels(&mut rng);
        let j = rng.random_range(0..sizes.len());
        let jp = rng.random_range(0..sizes.len());
        let closed = coclustering_probability(&state, j, jp, &k);
        t.diff(closed, coclustering_general(&state, j, jp, &k.as_generic()));
        t.diff(closed, coclustering_chain_rule(&state, j, jp, &k));
    }
    t.report(Suite::Coclust, 1e-12)
}

fn elicit_suite(seed: u64, states: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new();
    for _ in 0..states {
        let sizes = random_layer_sizes(&mut rng, 4, 30);
        let state = random_state(&mut rng, &sizes, 6);
        let k = random_kernels(&mut rng);
        let j = rng.random_range(0..sizes.len());
        let r = elicitation_check(&state, j, &k);
        t.diff(r.within_prob + r.outside_prob(), 1.0);
        if r.condition_holds == Some(true) && r.within_prob < r.outside_prob() - 1e-12 {
            t.violations += 1;
        }
    }
    t.report(Suite::Elicit, 1e-12)
}

pub fn run_suite(suite: Suite, max_n: usize, seed: u64) -> CheckReport {
    match suite {
        Suite::Eppf => eppf_suite(max_n),
        Suite::Peppf => peppf_suite(max_n.max(5)),
        Suite::Urns => urn_suite(seed, 1000),
        Suite::Coclust => coclust_suite(seed, 1000),
        Suite::Elicit => elicit_suite(seed, 10_000),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for s in [Suite::Eppf, Suite::Peppf] {
            let r = run_suite(s, 6, 0);
            assert!(r.passed, "{r}");
        }
        assert!(urn_suite(1, 50).passed);
        assert!(coclust_suite(2, 50).passed);
        assert!(elicit_suite(3, 200).passed);
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
