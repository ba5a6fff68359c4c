//! Blocked QR with column pivots chosen from a Gaussian sketch of the
//! trailing matrix.
//!
//! Classical column-pivoted QR is unblocked and memory bound; picking a
//! whole panel of pivots from a small sketch `Ω A` lets the trailing update
//! run as a blocked Householder application instead. The leading diagonal of
//! `R` is rank revealing in practice, which is what the truncated solve needs.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::{householder, qr};
use faer::{Conj, Mat, MatMut, MatRef, Par};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const BLOCK: usize = 128;
const OVERSAMPLE: usize = 8;
const SKETCH_SEED: u64 = 0x5eed_0f_0a;

pub(crate) struct SketchPivotedQr {
    /// Householder vectors below the diagonal, `R` on and above it.
    factors: Mat<f64>,
    /// `(first column, panel width, block Householder coefficients)`.
    panels: Vec<(usize, usize, Mat<f64>)>,
    /// `perm[k]` is the original index of factored column `k`.
    perm: Vec<usize>,
}

fn apply_qt(basis: MatRef<'_, f64>, coeff: MatRef<'_, f64>, target: MatMut<'_, f64>) {
    let scratch = householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
        basis.nrows(),
        coeff.nrows(),
        target.ncols(),
    );
    householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
        basis,
        coeff,
        Conj::No,
        target,
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
    );
}

impl SketchPivotedQr {
    pub(crate) fn factor(mut a: Mat<f64>) -> Self {
        let (m, n) = a.shape();
        let size = m.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(SKETCH_SEED);
        let omega = Mat::<f64>::from_fn(BLOCK + OVERSAMPLE, m, |_, _| StandardNormal.sample(&mut rng));
        let mut perm: Vec<usize> = (0..n).collect();
        let mut panels = Vec::new();

        let mut j = 0;
        while j < size {
            let bj = BLOCK.min(size - j);
            let sketch = omega.as_ref().get(..bj + OVERSAMPLE, ..m - j) * a.as_ref().get(j.., j..);
            let cpqr = sketch.col_piv_qr();
            let (fwd, _) = cpqr.P().arrays();

            // chosen pivots first, the rest keep their relative order
            let mut chosen = vec![false; n - j];
            let mut order: Vec<usize> = fwd[..bj].to_vec();
            for &c in &order {
                chosen[c] = true;
            }
            order.extend((0..n - j).filter(|&c| !chosen[c]));
            let old = a.as_ref().get(.., j..).to_owned();
            let old_perm = perm[j..].to_vec();
            for (dst, &src) in order.iter().enumerate() {
                a.as_mut().col_mut(j + dst).copy_from(old.col(src));
                perm[j + dst] = old_perm[src];
            }

            let mut coeff = Mat::<f64>::zeros(bj, bj);
            {
                let panel = a.as_mut().get_mut(j.., j..j + bj);
                let scratch =
                    qr::no_pivoting::factor::qr_in_place_scratch::<f64>(m - j, bj, bj, Par::Seq, Default::default());
                qr::no_pivoting::factor::qr_in_place(
                    panel,
                    coeff.as_mut(),
                    Par::Seq,
                    MemStack::new(&mut MemBuffer::new(scratch)),
                    Default::default(),
                );
            }
            if j + bj < n {
                let (left, right) = a.as_mut().split_at_col_mut(j + bj);
                apply_qt(left.as_ref().get(j.., j..j + bj), coeff.as_ref(), right.subrows_mut(j, m - j));
            }
            panels.push((j, bj, coeff));
            j += bj;
        }
        SketchPivotedQr { factors: a, panels, perm }
    }

    /// Number of leading diagonal entries with `|R_kk| > tol |R_00|`.
    pub(crate) fn rank(&self, tol: f64) -> usize {
        let size = self.factors.nrows().min(self.factors.ncols());
        if size == 0 {
            return 0;
        }
        let r00 = self.factors[(0, 0)].abs();
        if r00 == 0.0 || !r00.is_finite() {
            return 0;
        }
        (0..size).take_while(|&k| self.factors[(k, k)].abs() > tol * r00).count()
    }

    /// Truncated least-squares solve using the leading `rank` columns.
    pub(crate) fn solve(&self, rhs: &[f64], rank: usize) -> Vec<f64> {
        let (m, n) = self.factors.shape();
        let mut y = Mat::<f64>::from_fn(m, 1, |i, _| rhs[i]);
        for (j, bj, coeff) in &self.panels {
            apply_qt(self.factors.as_ref().get(*j.., *j..*j + *bj), coeff.as_ref(), y.as_mut().subrows_mut(*j, m - *j));
        }
        let r = &self.factors;
        let mut z = vec![0.0; rank];
        for i in (0..rank).rev() {
            let mut s = y[(i, 0)];
            for k in i + 1..rank {
                s -= r[(i, k)] * z[k];
            }
            z[i] = s / r[(i, i)];
        }
        let mut c = vec![0.0; n];
        for (i, zi) in z.into_iter().enumerate() {
            c[self.perm[i]] = zi;
        }
        c
    }
}
