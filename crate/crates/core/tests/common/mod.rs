//! Independent numerical oracles for the integration suites.
//!
//! Everything here is implemented from first principles with different
//! algorithms and a different RNG than the library, so agreement between the
//! two is evidence of correctness rather than of a shared bug:
//! SplitMix64 instead of ChaCha8, sorted-spacings instead of
//! exponential-normalization for the simplex, and a primal all-constraints
//! Newton solver instead of alternating proportional fitting.

// Each integration binary pulls in its own subset of the oracles.
#![allow(dead_code)]

pub const CELLS: usize = 8;

/// `(e1, e2, c)` to flat cell position, the layout the library uses.
pub fn idx(e1: usize, e2: usize, c: usize) -> usize {
    (e1 << 2) | (e2 << 1) | c
}

// --------------------------------------------------------------------------
// RNG: SplitMix64 (Vigna's reference constants).

pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on the open interval (0, 1): 53 mantissa bits, offset half a
    /// step so neither endpoint is reachable.
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

// --------------------------------------------------------------------------
// Uniform simplex draw by sorted-uniform spacings: seven sorted U(0,1) cuts
// split [0,1] into eight exchangeable pieces, which is Dirichlet(1,...,1).

pub fn dirichlet8(rng: &mut SplitMix64) -> [f64; 8] {
    let mut cuts = [0.0; 7];
    for c in cuts.iter_mut() {
        *c = rng.next_f64();
    }
    cuts.sort_by(f64::total_cmp);
    let mut out = [0.0; 8];
    let mut prev = 0.0;
    for (i, &c) in cuts.iter().enumerate() {
        out[i] = c - prev;
        prev = c;
    }
    out[7] = 1.0 - prev;
    out
}

/// |P(C|E1&E2) - P(C|E1&~E2) - P(C|~E1&E2) + P(C|~E1&~E2)| straight from
/// raw cells.
pub fn additivity(cells: &[f64; 8]) -> f64 {
    let q = |e1: usize, e2: usize| {
        cells[idx(e1, e2, 1)] / (cells[idx(e1, e2, 0)] + cells[idx(e1, e2, 1)])
    };
    (q(1, 1) - q(1, 0) - q(0, 1) + q(0, 0)).abs()
}

// --------------------------------------------------------------------------
// Closed-form (E1, E2) margin of the cross-entropy projection.
//
// The projection preserves the prior's pair odds ratio R while moving the
// margins to (p1, p2), so Q11 = x solves
//     x (1 - p1 - p2 + x) = R (p1 - x)(p2 - x),
// a quadratic with exactly one root in the Frechet interval
// [max(0, p1 + p2 - 1), min(p1, p2)].

/// Returns the pair margin in (e1, e2) order [(0,0), (0,1), (1,0), (1,1)].
pub fn plackett_margin(prior: &[f64; 8], p1: f64, p2: f64) -> [f64; 4] {
    let m = |e1: usize, e2: usize| prior[idx(e1, e2, 0)] + prior[idx(e1, e2, 1)];
    let r = (m(1, 1) * m(0, 0)) / (m(1, 0) * m(0, 1));
    let lo = (p1 + p2 - 1.0).max(0.0);
    let hi = p1.min(p2);
    let x = if (r - 1.0).abs() < 1e-12 {
        p1 * p2
    } else {
        // (1 - R) x^2 + [(1 - p1 - p2) + R (p1 + p2)] x - R p1 p2 = 0,
        // solved in the cancellation-safe two-root form.
        let a = 1.0 - r;
        let b = (1.0 - p1 - p2) + r * (p1 + p2);
        let c = -r * p1 * p2;
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let q = -0.5 * (b + b.signum() * disc);
        let roots = [q / a, c / q];
        // Self-validate by re-deriving the odds ratio from each candidate.
        let ratio_gap = |x: f64| {
            let (q00, q01, q10) = (1.0 - p1 - p2 + x, p2 - x, p1 - x);
            if q00 <= 0.0 || q01 <= 0.0 || q10 <= 0.0 || x <= 0.0 {
                f64::INFINITY
            } else {
                ((x * q00) / (q01 * q10) - r).abs()
            }
        };
        let slack = 1e-9;
        let best = roots
            .into_iter()
            .filter(|&x| x >= lo - slack && x <= hi + slack)
            .min_by(|&a, &b| ratio_gap(a).total_cmp(&ratio_gap(b)))
            .expect("no quadratic root in the Frechet interval");
        assert!(
            ratio_gap(best) < 1e-6 * r.max(1.0),
            "quadratic root fails to reproduce the odds ratio"
        );
        best
    };
    [1.0 - p1 - p2 + x, p2 - x, p1 - x, x]
}

// --------------------------------------------------------------------------
// Brute-force constrained cross-entropy minimizer.
//
// Minimizes KL(x || prior) over {x > 0, sum x = 1, P(E1=1) = p1, P(E2=1) = p2}
// by damped Newton steps in an explicit orthonormal coordinate system for the
// 5-dimensional constraint plane. Primal and second-order, with every
// constraint enforced simultaneously.

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;
const T: f64 = 0.5 * std::f64::consts::FRAC_1_SQRT_2;

/// Orthonormal basis of the null space of the three constraint gradients
/// (total mass, E1 mass, E2 mass). The first four shift conclusion mass
/// within one evidence slice; the fifth trades mass between the diagonal and
/// off-diagonal slices, changing the pair odds ratio at fixed margins.
static BASIS: [[f64; 8]; 5] = [
    [-S, S, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -S, S, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -S, S, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -S, S],
    [T, T, -T, -T, -T, -T, T, T],
];

fn point(x0: &[f64; 8], z: &[f64; 5]) -> Option<[f64; 8]> {
    let mut x = *x0;
    for (k, b) in BASIS.iter().enumerate() {
        for i in 0..CELLS {
            x[i] += z[k] * b[i];
        }
    }
    if x.iter().all(|&v| v > 0.0) {
        Some(x)
    } else {
        None
    }
}

fn kl(x: &[f64; 8], q: &[f64; 8]) -> f64 {
    x.iter().zip(q).map(|(&xi, &qi)| xi * (xi / qi).ln()).sum()
}

/// Solves a 5x5 system by Gaussian elimination with partial pivoting.
// Index form on purpose: this mirrors the textbook algorithm.
#[allow(clippy::needless_range_loop)]
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> [f64; 5] {
    for col in 0..5 {
        let pivot = (col..5)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col] != 0.0, "singular Newton system");
        for row in col + 1..5 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 5];
    for col in (0..5).rev() {
        let mut s = b[col];
        for k in col + 1..5 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    x
}

pub fn brute_force_mce(prior: &[f64; 8], p1: f64, p2: f64) -> [f64; 8] {
    // Feasible interior start: independent margins, conclusion mass split
    // evenly. Satisfies all three constraints by construction.
    let mut x0 = [0.0; 8];
    for e1 in 0..2 {
        for e2 in 0..2 {
            let m1 = if e1 == 1 { p1 } else { 1.0 - p1 };
            let m2 = if e2 == 1 { p2 } else { 1.0 - p2 };
            x0[idx(e1, e2, 0)] = 0.5 * m1 * m2;
            x0[idx(e1, e2, 1)] = 0.5 * m1 * m2;
        }
    }

    let gradient = |x: &[f64; 8]| -> [f64; 5] {
        // Plane-coordinate gradient g = B^T (ln(x/q) + 1).
        let mut gx = [0.0; 8];
        for i in 0..CELLS {
            gx[i] = (x[i] / prior[i]).ln() + 1.0;
        }
        let mut g = [0.0; 5];
        for (k, b) in BASIS.iter().enumerate() {
            g[k] = b.iter().zip(&gx).map(|(&bi, &gi)| bi * gi).sum();
        }
        g
    };
    let sup = |g: &[f64; 5]| g.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let mut z = [0.0; 5];
    let mut x = point(&x0, &z).expect("product start must be interior");
    let mut g = gradient(&x);
    for _ in 0..200 {
        let gnorm = sup(&g);
        if gnorm < 1e-12 {
            break;
        }

        // Newton direction from H = B^T diag(1/x) B.
        let mut h = [[0.0; 5]; 5];
        for r in 0..5 {
            for c in r..5 {
                let v = (0..CELLS).map(|i| BASIS[r][i] * BASIS[c][i] / x[i]).sum();
                h[r][c] = v;
                h[c][r] = v;
            }
        }
        let step = solve5(h, [-g[0], -g[1], -g[2], -g[3], -g[4]]);
        let slope: f64 = g.iter().zip(&step).map(|(&gi, &si)| gi * si).sum();
        assert!(slope < 0.0, "Newton direction lost descent");

        if gnorm < 1e-6 {
            // Quadratic-convergence region: objective decreases fall below
            // floating-point resolution here, so step on the gradient alone
            // and stop if it ever stops contracting.
            let mut t = 1.0;
            let mut advanced = false;
            for _ in 0..90 {
                let mut zt = z;
                for k in 0..5 {
                    zt[k] += t * step[k];
                }
                if let Some(xt) = point(&x0, &zt) {
                    let gt = gradient(&xt);
                    if sup(&gt) < gnorm {
                        z = zt;
                        x = xt;
                        g = gt;
                        advanced = true;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !advanced {
                break;
            }
            continue;
        }

        let f0 = kl(&x, prior);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..90 {
            let mut zt = z;
            for k in 0..5 {
                zt[k] += t * step[k];
            }
            if let Some(xt) = point(&x0, &zt) {
                if kl(&xt, prior) <= f0 + 1e-4 * t * slope {
                    z = zt;
                    x = xt;
                    g = gradient(&x);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        // Progress stalled at floating-point resolution; the check below
        // decides whether the gradient is already small enough.
        if !accepted {
            break;
        }
    }

    let worst = sup(&gradient(&x));
    assert!(worst < 1e-9, "oracle did not converge: plane gradient {worst:e}");
    x
}
