//! B-spline bases on uniform, extended knot grids and the spline activation
//! `phi(x) = w_b * silu(x) + sum_i w_i * B_i(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{GrnError, Result};

/// Largest supported spline order. Local evaluation uses fixed-size buffers.
pub const MAX_ORDER: usize = 7;

/// Knot vector of a B-spline basis.
///
/// A grid with `grid_size` intervals over the nominal domain `[lo, hi]` and
/// order `k` stores `grid_size + 2k + 1` strictly increasing knots: the
/// nominal breakpoints plus `k` uniformly spaced knots beyond each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr")]
pub struct SplineGrid {
    knots: Vec<f64>,
    order: usize,
    grid_size: usize,
}

#[derive(Deserialize)]
struct GridRepr {
    knots: Vec<f64>,
    order: usize,
    grid_size: usize,
}

impl TryFrom<GridRepr> for SplineGrid {
    type Error = GrnError;

    fn try_from(r: GridRepr) -> Result<Self> {
        SplineGrid::from_knots(r.knots, r.order, r.grid_size)
    }
}

impl SplineGrid {
    pub fn uniform(lo: f64, hi: f64, grid_size: usize, order: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GrnError::config(format!("invalid spline domain [{lo}, {hi}]")));
        }
        if grid_size == 0 {
            return Err(GrnError::config("grid size must be positive"));
        }
        let h = (hi - lo) / grid_size as f64;
        let k = order as isize;
        let knots = (-k..=grid_size as isize + k)
            .map(|i| lo + i as f64 * h)
            .collect();
        Self::from_knots(knots, order, grid_size)
    }

    pub fn from_knots(knots: Vec<f64>, order: usize, grid_size: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(GrnError::config(format!(
                "spline order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if grid_size == 0 {
            return Err(GrnError::config("grid size must be positive"));
        }
        if knots.len() != grid_size + 2 * order + 1 {
            return Err(GrnError::config(format!(
                "expected {} knots for G={grid_size}, k={order}, got {}",
                grid_size + 2 * order + 1,
                knots.len()
            )));
        }
        if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GrnError::config("knots must be finite and strictly increasing"));
        }
        Ok(SplineGrid {
            knots,
            order,
            grid_size,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Number of basis functions, `G + k`.
    pub fn num_basis(&self) -> usize {
        self.grid_size + self.order
    }

    /// Nominal domain `[knots[k], knots[k + G]]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.order], self.knots[self.order + self.grid_size])
    }

    /// All `G + k` basis values at `x` (Cox-de Boor).
    pub fn basis(&self, x: f64) -> Result<Vec<f64>> {
        check_finite(x)?;
        let mut out = vec![0.0; self.num_basis()];
        let local = self.local(x);
        for j in 0..local.len {
            out[local.first + j] = local.values[j];
        }
        Ok(out)
    }

    /// Derivatives `dB_i/dx` of all basis functions at `x`.
    pub fn basis_derivative(&self, x: f64) -> Result<Vec<f64>> {
        check_finite(x)?;
        let mut out = vec![0.0; self.num_basis()];
        let local = self.local(x);
        for j in 0..local.len {
            out[local.first + j] = local.derivs[j];
        }
        Ok(out)
    }

    /// Evaluates the (at most `k + 1`) nonzero basis functions at `x` and
    /// their derivatives. `x` must be finite.
    pub(crate) fn local(&self, x: f64) -> LocalBasis {
        let t = &self.knots;
        let nk = t.len();
        let k = self.order;
        let mut out = LocalBasis::default();
        if !(x >= t[0] && x < t[nk - 1]) {
            return out;
        }
        // t[s] <= x < t[s + 1]
        let s = t.partition_point(|&v| v <= x) - 1;

        // cur[j] holds N_{s-d+j, d}; nonexistent functions stay 0.
        let mut cur = [0.0f64; MAX_ORDER + 1];
        let mut lower = [0.0f64; MAX_ORDER + 1];
        cur[0] = 1.0;
        for d in 1..=k {
            let mut next = [0.0f64; MAX_ORDER + 1];
            for (j, slot) in next.iter_mut().enumerate().take(d + 1) {
                let i = s as isize - d as isize + j as isize;
                if i < 0 || i as usize + d + 1 > nk - 1 {
                    continue;
                }
                let i = i as usize;
                let left = if j >= 1 { cur[j - 1] } else { 0.0 };
                let right = if j < d { cur[j] } else { 0.0 };
                let mut v = 0.0;
                if left != 0.0 {
                    v += (x - t[i]) / (t[i + d] - t[i]) * left;
                }
                if right != 0.0 {
                    v += (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * right;
                }
                *slot = v;
            }
            if d == k {
                lower = cur;
            }
            cur = next;
        }

        let nb = self.num_basis() as isize;
        let base = s as isize - k as isize;
        let mut n = 0;
        for j in 0..=k {
            let i = base + j as isize;
            if i < 0 || i >= nb {
                continue;
            }
            let iu = i as usize;
            let left = if j >= 1 { lower[j - 1] / (t[iu + k] - t[iu]) } else { 0.0 };
            let right = if j < k {
                lower[j] / (t[iu + k + 1] - t[iu + 1])
            } else {
                0.0
            };
            if n == 0 {
                out.first = iu;
            }
            out.values[n] = cur[j];
            out.derivs[n] = k as f64 * (left - right);
            n += 1;
        }
        out.len = n;
        out
    }
}

/// Nonzero window of a basis evaluation: entries `first .. first + len`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LocalBasis {
    pub first: usize,
    pub len: usize,
    pub values: [f64; MAX_ORDER + 1],
    pub derivs: [f64; MAX_ORDER + 1],
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(GrnError::domain(format!("non-finite spline argument {x}")))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x * sigmoid(x)`.
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// A single learnable edge function of a KAN layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineActivation {
    pub base_weight: f64,
    pub spline_weights: Vec<f64>,
    pub grid: SplineGrid,
}

impl SplineActivation {
    pub fn new(base_weight: f64, spline_weights: Vec<f64>, grid: SplineGrid) -> Result<Self> {
        if spline_weights.len() != grid.num_basis() {
            return Err(GrnError::Shape {
                expected: grid.num_basis(),
                got: spline_weights.len(),
            });
        }
        if !base_weight.is_finite() || spline_weights.iter().any(|w| !w.is_finite()) {
            return Err(GrnError::domain("activation weights must be finite"));
        }
        Ok(SplineActivation {
            base_weight,
            spline_weights,
            grid,
        })
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        let local = self.grid.local(x);
        let spline: f64 = (0..local.len)
            .map(|j| self.spline_weights[local.first + j] * local.values[j])
            .sum();
        Ok(self.base_weight * silu(x) + spline)
    }

    /// `d phi / dx`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        let local = self.grid.local(x);
        let spline: f64 = (0..local.len)
            .map(|j| self.spline_weights[local.first + j] * local.derivs[j])
            .sum();
        Ok(self.base_weight * silu_derivative(x) + spline)
    }
}
