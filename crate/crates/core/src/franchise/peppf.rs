//! Exact prior mass of an allocation via its layer-by-profile frequencies,
//! and an independent sequential-urn enumeration of the same masses.

use std::collections::BTreeMap;

use super::{joint_conditional, FranchiseError, FranchiseState, PriorKernels, Seat};
use crate::eppf::{integer_partitions, set_partition_count};
use crate::log_sum_exp;

pub const PEPPF_DEFAULT_CAP: usize = 10;

/// Log prior probability of one allocation whose layer-by-profile counts
/// are `freqs[j][h] = n_jh`. Refuses more than [`PEPPF_DEFAULT_CAP`] nodes.
pub fn peppf_log_mass(freqs: &[Vec<usize>], kernels: &PriorKernels) -> Result<f64, FranchiseError> {
    peppf_log_mass_with_cap(freqs, kernels, PEPPF_DEFAULT_CAP)
}

pub fn peppf_log_mass_with_cap(
    freqs: &[Vec<usize>],
    kernels: &PriorKernels,
    cap: usize,
) -> Result<f64, FranchiseError> {
    let h_count = freqs.first().map_or(0, Vec::len);
    if freqs.iter().any(|row| row.len() != h_count) {
        return Err(FranchiseError::BadFrequencies);
    }
    if (0..h_count).any(|h| freqs.iter().all(|row| row[h] == 0)) {
        return Err(FranchiseError::BadFrequencies);
    }
    let total: usize = freqs.iter().flatten().sum();
    if total > cap {
        return Err(FranchiseError::TooLarge(total, cap));
    }
    // For every occupied cell, the ways of splitting n_jh into subgroups.
    // Summing compositions with multinomial / ℓ! weights equals summing
    // integer partitions weighted by their number of set partitions.
    let cells: Vec<(usize, usize, Vec<(Vec<usize>, f64)>)> = freqs
        .iter()
        .enumerate()
        .flat_map(|(j, row)| row.iter().enumerate().map(move |(h, &n)| (j, h, n)))
        .filter(|&(_, _, n)| n > 0)
        .map(|(j, h, n)| {
            let opts = integer_partitions(n)
                .into_iter()
                .map(|p| {
                    let w = set_partition_count(&p).ln();
                    (p, w)
                })
                .collect();
            (j, h, opts)
        })
        .collect();

    struct Walk<'a> {
        cells: &'a [(usize, usize, Vec<(Vec<usize>, f64)>)],
        kernels: &'a PriorKernels,
        layer_parts: Vec<Vec<usize>>,
        ell: Vec<usize>,
        terms: Vec<f64>,
    }
    impl Walk<'_> {
        fn go(&mut self, i: usize, lw: f64) {
            if i == self.cells.len() {
                let mut t = lw + self.kernels.root.log_phi_unchecked(&self.ell);
                for parts in &self.layer_parts {
                    t += self.kernels.layer.log_phi_unchecked(parts);
                }
                self.terms.push(t);
                return;
            }
            let (j, h, ref opts) = self.cells[i];
            for (parts, w) in opts {
                let before = self.layer_parts[j].len();
                self.layer_parts[j].extend_from_slice(parts);
                self.ell[h] += parts.len();
                self.go(i + 1, lw + w);
                self.ell[h] -= parts.len();
                self.layer_parts[j].truncate(before);
            }
        }
    }
    let mut walk = Walk {
        cells: &cells,
        kernels,
        layer_parts: vec![Vec::new(); freqs.len()],
        ell: vec![0; h_count],
        terms: Vec::new(),
    };
    walk.go(0, 0.0);
    Ok(log_sum_exp(walk.terms.iter().copied()))
}

/// Layer-by-profile counts `n_jh` of allocation `z` (labels `0..H`).
pub fn frequency_array(layer_of: &[usize], num_layers: usize, z: &[usize]) -> Vec<Vec<usize>> {
    let h_count = z.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![vec![0; h_count]; num_layers];
    for (&j, &h) in layer_of.iter().zip(z) {
        out[j][h] += 1;
    }
    out
}

/// Prior mass of every allocation of `layer_of`'s nodes, keyed by canonical
/// `z`, obtained by enumerating every `(z, w)` sequence of the joint urn.
pub fn urn_partition_masses(
    layer_of: &[usize],
    num_layers: usize,
    kernels: &PriorKernels,
    cap: usize,
) -> Result<BTreeMap<Vec<usize>, f64>, FranchiseError> {
    if layer_of.len() > cap {
        return Err(FranchiseError::TooLarge(layer_of.len(), cap));
    }
    fn go(
        state: &mut FranchiseState,
        v: usize,
        prob: f64,
        kernels: &PriorKernels,
        out: &mut BTreeMap<Vec<usize>, f64>,
    ) -> Result<(), FranchiseError> {
        if v == state.num_nodes() {
            *out.entry(state.canonical_z()).or_insert(0.0) += prob;
            return Ok(());
        }
        let table = joint_conditional(state, state.layer_of(v), kernels);
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
            );
        for (seat, p) in seats {
            state.insert_node(v, seat)?;
            go(state, v + 1, prob * p, kernels, out)?;
            state.remove_node(v)?;
        }
        Ok(())
    }
    let mut state = FranchiseState::empty(layer_of.to_vec(), num_layers)?;
    let mut out = BTreeMap::new();
    go(&mut state, 0, 1.0, kernels, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_node_has_mass_one() {
        let k = PriorKernels::hdp(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(peppf_log_mass(&[vec![1]], &k).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_same_layer_nodes_hdp() {
        let k = PriorKernels::hdp(1.0, 1.0).unwrap();
        let same = peppf_log_mass(&[vec![2]], &k).unwrap().exp();
        assert_abs_diff_eq!(same, 0.75, epsilon = 1e-14);
    }

    #[test]
    fn two_layers_one_node_each_normalizes() {
        for k in [PriorKernels::hdp(1.3, 0.4).unwrap(), PriorKernels::hnsp(0.2, 0.7).unwrap()] {
            let same = peppf_log_mass(&[vec![1], vec![1]], &k).unwrap().exp();
            let diff = peppf_log_mass(&[vec![1, 0], vec![0, 1]], &k).unwrap().exp();
            assert_abs_diff_eq!(same + diff, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn direct_and_sequential_agree_on_v21() {
        let k = PriorKernels::hdp(1.0, 1.0).unwrap();
        let layer_of = [0, 0, 1];
        let masses = urn_partition_masses(&layer_of, 2, &k, 10).unwrap();
        assert_eq!(masses.len(), 5);
        for (z, p) in &masses {
            let direct = peppf_log_mass(&frequency_array(&layer_of, 2, z), &k).unwrap().exp();
            assert_abs_diff_eq!(direct, *p, epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let k = PriorKernels::hdp(1.0, 1.0).unwrap();
        assert!(matches!(peppf_log_mass(&[vec![11]], &k), Err(FranchiseError::TooLarge(11, 10))));
        assert!(peppf_log_mass(&[vec![1, 0]], &k).is_err());
        assert!(peppf_log_mass(&[vec![1], vec![1, 2]], &k).is_err());
    }
}
