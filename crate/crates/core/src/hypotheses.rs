//! Sampling checks of the structural hypotheses on `f`.
//!
//! Every check runs over a declared box of `(x, z, p)`. A failure carries a
//! witness that can be re-evaluated with [`Witness::recheck`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rhs::{Part, RhsSystem};

/// Hypotheses on `f`, plus the sign condition on the quotients `d_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// `fⁱ > 0`.
    F1,
    /// `fⁱ ≥ c_f > 0`.
    F2,
    /// Split into a part Lipschitz in `zⁱ` and a part non-increasing in `zⁱ`.
    F3,
    /// Non-increasing in `z^j`, `j ≠ i`.
    F4,
    /// Lipschitz in `p`.
    F5,
    /// `fⁱ(y₁, x', z, p̄) ≥ fⁱ(x, z, p)` for `x₁ ≤ y₁ ≤ −x₁`, `x₁, p₁ ≤ 0`.
    F6,
    /// Invariance under `x₁ → |x₁|`, `p₁ → |p₁|`.
    F7,
    /// Invariance under independent rotations of `x` and `p`.
    F8,
    /// `d_ij ≤ 0` on sampled points.
    DijSign,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 9] = [
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F3,
        Hypothesis::F4,
        Hypothesis::F5,
        Hypothesis::F6,
        Hypothesis::F7,
        Hypothesis::F8,
        Hypothesis::DijSign,
    ];
}

/// Closed ranges `[lo, hi]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBox {
    pub x: Vec<[f64; 2]>,
    pub z: Vec<[f64; 2]>,
    pub p: Vec<[f64; 2]>,
}

impl SampleBox {
    pub fn uniform(n: usize, m: usize, x: [f64; 2], z: [f64; 2], p: [f64; 2]) -> Self {
        SampleBox {
            x: vec![x; n],
            z: vec![z; m],
            p: vec![p; n],
        }
    }

    fn validate(&self, sys: &RhsSystem) -> Result<()> {
        if self.x.len() != sys.dim() || self.p.len() != sys.dim() || self.z.len() != sys.m() {
            return Err(Error::invalid("sample box dimensions do not match the system"));
        }
        let ok = self
            .x
            .iter()
            .chain(&self.z)
            .chain(&self.p)
            .all(|[a, b]| a.is_finite() && b.is_finite() && a <= b);
        if !ok {
            return Err(Error::invalid("sample box ranges must be finite with lo ≤ hi"));
        }
        Ok(())
    }

    fn dims(&self) -> usize {
        self.x.len() + self.z.len() + self.p.len()
    }

    fn point(&self, u: &[f64]) -> Point {
        let lerp = |r: &[f64; 2], t: f64| r[0] + t * (r[1] - r[0]);
        let nx = self.x.len();
        let nz = self.z.len();
        Point {
            x: self.x.iter().zip(&u[..nx]).map(|(r, t)| lerp(r, *t)).collect(),
            z: self.z.iter().zip(&u[nx..nx + nz]).map(|(r, t)| lerp(r, *t)).collect(),
            p: self.p.iter().zip(&u[nx + nz..]).map(|(r, t)| lerp(r, *t)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Point {
    x: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable { reason: String },
}

/// A concrete violation, re-evaluable against the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `fⁱ(x, z, p) ≤ 0`.
    NonPositive { i: usize, x: Vec<f64>, z: Vec<f64>, p: Vec<f64>, value: f64 },
    /// The declared split does not add up to `fⁱ`.
    SplitMismatch { i: usize, x: Vec<f64>, z: Vec<f64>, p: Vec<f64>, f: f64, sum: f64 },
    /// `g(z + h e_j) > g(z)` with `h > 0`, where `g` is `fⁱ` or its monotone part.
    Increasing {
        i: usize,
        j: usize,
        monotone_part: bool,
        x: Vec<f64>,
        z: Vec<f64>,
        p: Vec<f64>,
        h: f64,
        before: f64,
        after: f64,
    },
    /// Difference quotients grow as the step shrinks: no local Lipschitz bound.
    Unbounded {
        i: usize,
        variable: String,
        x: Vec<f64>,
        z: Vec<f64>,
        p: Vec<f64>,
        coarse: f64,
        fine: f64,
    },
    /// A quotient exceeds the declared Lipschitz constant.
    ExceedsDeclared {
        i: usize,
        variable: String,
        x: Vec<f64>,
        z: Vec<f64>,
        p: Vec<f64>,
        estimate: f64,
        declared: f64,
    },
    /// `fⁱ(y₁, x', z, p̄) < fⁱ(x, z, p)`.
    Reflection { i: usize, x: Vec<f64>, y1: f64, z: Vec<f64>, p: Vec<f64>, lhs: f64, rhs: f64 },
    /// `fⁱ(x, z, p) ≠ fⁱ(|x₁|, …, |p₁|, …)`.
    SignFlip { i: usize, x: Vec<f64>, z: Vec<f64>, p: Vec<f64>, lhs: f64, rhs: f64 },
    /// `fⁱ(x, z, p) ≠ fⁱ(Ox, z, O'p)`.
    Rotation {
        i: usize,
        x: Vec<f64>,
        z: Vec<f64>,
        p: Vec<f64>,
        o_x: Vec<Vec<f64>>,
        o_p: Vec<Vec<f64>>,
        lhs: f64,
        rhs: f64,
    },
    /// `d_ij > 0`.
    PositiveQuotient { i: usize, j: usize, x: Vec<f64>, z: Vec<f64>, p: Vec<f64>, h: f64, d: f64 },
    /// Evaluation failed inside the box.
    EvaluationError { i: usize, x: Vec<f64>, z: Vec<f64>, p: Vec<f64>, message: String },
}

const REL_TOL: f64 = 1e-10;

/// Symmetric difference quotient of the Lipschitz split part in `zⁱ`
/// (`is_z`), or the Euclidean norm of the quotient gradient of `fⁱ` in `p`.
fn lip_quotient(sys: &RhsSystem, i: usize, is_z: bool, x: &[f64], z: &[f64], p: &[f64], h: f64) -> Result<f64> {
    if is_z {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += h;
        zm[i] -= h;
        let a = sys.eval_part(i, Part::Lipschitz, x, &zp, p)?;
        let b = sys.eval_part(i, Part::Lipschitz, x, &zm, p)?;
        return Ok(((a - b) / (2.0 * h)).abs());
    }
    let mut s = 0.0;
    for c in 0..p.len() {
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        pp[c] += h;
        pm[c] -= h;
        let a = sys.eval_f(i, x, z, &pp)?;
        let b = sys.eval_f(i, x, z, &pm)?;
        s += ((a - b) / (2.0 * h)).powi(2);
    }
    Ok(s.sqrt())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn matvec(o: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    o.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn flip(v: &[f64]) -> Vec<f64> {
    let mut w = v.to_vec();
    w[0] = w[0].abs();
    w
}

impl Witness {
    /// Re-evaluates the witness; `true` when the violation is reproduced.
    pub fn recheck(&self, sys: &RhsSystem) -> Result<bool> {
        Ok(match self {
            Witness::NonPositive { i, x, z, p, .. } => sys.eval_f(*i, x, z, p)? <= 0.0,
            Witness::SplitMismatch { i, x, z, p, .. } => {
                let f = sys.eval_f(*i, x, z, p)?;
                let s = sys.eval_part(*i, Part::Lipschitz, x, z, p)? + sys.eval_part(*i, Part::Monotone, x, z, p)?;
                (f - s).abs() > 1e-12 * f.abs().max(1.0)
            }
            Witness::Increasing {
                i,
                j,
                monotone_part,
                x,
                z,
                p,
                h,
                ..
            } => {
                let part = if *monotone_part { Part::Monotone } else { Part::Full };
                let mut zh = z.clone();
                zh[*j] += h;
                let a = sys.eval_part(*i, part, x, z, p)?;
                let b = sys.eval_part(*i, part, x, &zh, p)?;
                b > a && !close(a, b)
            }
            Witness::Unbounded { i, variable, x, z, p, .. } => {
                let is_z = variable == "z";
                let coarse = lip_quotient(sys, *i, is_z, x, z, p, 1e-2)?;
                let fine = lip_quotient(sys, *i, is_z, x, z, p, 1e-4)?;
                fine > 10.0 * coarse.max(1e-8)
            }
            Witness::ExceedsDeclared { estimate, declared, .. } => *estimate > declared * (1.0 + 1e-6) + 1e-12,
            Witness::Reflection { i, x, y1, z, p, .. } => {
                let mut y = x.clone();
                y[0] = *y1;
                let mut pb = p.clone();
                pb[0] = -pb[0];
                let lhs = sys.eval_f(*i, &y, z, &pb)?;
                let rhs = sys.eval_f(*i, x, z, p)?;
                lhs < rhs && !close(lhs, rhs)
            }
            Witness::SignFlip { i, x, z, p, .. } => {
                let a = sys.eval_f(*i, x, z, p)?;
                let b = sys.eval_f(*i, &flip(x), z, &flip(p))?;
                !close(a, b)
            }
            Witness::Rotation { i, x, z, p, o_x, o_p, .. } => {
                let a = sys.eval_f(*i, x, z, p)?;
                let b = sys.eval_f(*i, &matvec(o_x, x), z, &matvec(o_p, p))?;
                !close(a, b)
            }
            Witness::PositiveQuotient { i, j, x, z, p, h, .. } => {
                let d = sys.d_ij(*i, *j, x, z, p, *h)?;
                d > REL_TOL * d.abs().max(1.0)
            }
            Witness::EvaluationError { i, x, z, p, .. } => sys.eval_f(*i, x, z, p).is_err(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub hypothesis: Hypothesis,
    #[serde(flatten)]
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// `c_f` for F2, the Lipschitz estimate for F3/F5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub sample_box: SampleBox,
    pub samples: usize,
    pub seed: u64,
    pub results: Vec<HypothesisResult>,
}

impl HypothesisReport {
    pub fn get(&self, h: Hypothesis) -> Option<&HypothesisResult> {
        self.results.iter().find(|r| r.hypothesis == h)
    }

    pub fn passes(&self, h: Hypothesis) -> bool {
        self.get(h).is_some_and(|r| r.status == Status::Pass)
    }
}

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

fn radical_inverse(mut k: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % b) as f64 * f;
        k /= b;
        f *= inv;
    }
    r
}

/// Randomly shifted Halton points in `[0, 1)^d`; coordinates past the
/// available prime bases fall back to pseudo-random draws.
pub fn halton(count: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    (0..count)
        .map(|k| {
            (0..d)
                .map(|c| {
                    if c < PRIMES.len() {
                        (radical_inverse(k as u64 + 1, PRIMES[c]) + shift[c]).fract()
                    } else {
                        rng.gen::<f64>()
                    }
                })
                .collect()
        })
        .collect()
}

/// Product of `n` Householder reflections from seeded random vectors.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv < 1e-3 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= nv);
        // q ← q (I − 2 v vᵀ)
        for row in q.iter_mut() {
            let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            row.iter_mut().zip(&v).for_each(|(a, b)| *a -= 2.0 * s * b);
        }
    }
    q
}

struct Ctx<'a> {
    sys: &'a RhsSystem,
    bx: &'a SampleBox,
    pts: Vec<Point>,
    /// Extra uniform coordinates per sample for steps and auxiliary draws.
    aux: Vec<Vec<f64>>,
    seed: u64,
}

enum Outcome {
    Ok,
    Fail(Witness),
    Error(Witness),
}

fn eval_err(i: usize, pt: &Point, e: Error) -> Outcome {
    Outcome::Error(Witness::EvaluationError {
        i,
        x: pt.x.clone(),
        z: pt.z.clone(),
        p: pt.p.clone(),
        message: e.to_string(),
    })
}

macro_rules! tryo {
    ($e:expr, $i:expr, $pt:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return eval_err($i, $pt, err),
        }
    };
}

impl Ctx<'_> {
    /// First non-`Ok` outcome in sample order.
    fn scan<F>(&self, f: F) -> Option<Outcome>
    where
        F: Fn(usize, &Point, &[f64]) -> Outcome + Sync + Send,
    {
        let outs = par::map_range(self.pts.len(), |k| f(k, &self.pts[k], &self.aux[k]));
        outs.into_iter().find(|o| !matches!(o, Outcome::Ok))
    }

    fn result(&self, h: Hypothesis, out: Option<Outcome>, estimate: Option<f64>) -> HypothesisResult {
        let (status, witness) = match out {
            None | Some(Outcome::Ok) => (Status::Pass, None),
            Some(Outcome::Fail(w)) => (Status::Fail, Some(w)),
            Some(Outcome::Error(w)) => {
                let reason = match &w {
                    Witness::EvaluationError { message, .. } => format!("evaluation failed in the box: {message}"),
                    _ => "evaluation failed in the box".into(),
                };
                (Status::NotApplicable { reason }, Some(w))
            }
        };
        HypothesisResult {
            hypothesis: h,
            status,
            witness,
            estimate,
        }
    }

    fn na(&self, h: Hypothesis, reason: &str) -> HypothesisResult {
        HypothesisResult {
            hypothesis: h,
            status: Status::NotApplicable { reason: reason.into() },
            witness: None,
            estimate: None,
        }
    }

    fn positivity(&self, h: Hypothesis) -> HypothesisResult {
        let m = self.sys.m();
        let outs = par::map_range(self.pts.len(), |k| {
            let pt = &self.pts[k];
            let mut lo = f64::INFINITY;
            for i in 0..m {
                let v = match self.sys.eval_f(i, &pt.x, &pt.z, &pt.p) {
                    Ok(v) => v,
                    Err(e) => return (eval_err(i, pt, e), lo),
                };
                if v <= 0.0 {
                    let w = Witness::NonPositive {
                        i,
                        x: pt.x.clone(),
                        z: pt.z.clone(),
                        p: pt.p.clone(),
                        value: v,
                    };
                    return (Outcome::Fail(w), v);
                }
                lo = lo.min(v);
            }
            (Outcome::Ok, lo)
        });
        let cf = outs.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let first = outs.into_iter().map(|o| o.0).find(|o| !matches!(o, Outcome::Ok));
        let estimate = (h == Hypothesis::F2 && first.is_none()).then_some(cf);
        self.result(h, first, estimate)
    }

    /// Step along coordinate `j` of `z` that stays inside the box.
    fn step_in_box(&self, z: &[f64], j: usize, t: f64) -> f64 {
        let [lo, hi] = self.bx.z[j];
        let room = hi - z[j];
        let width = (hi - lo).max(1e-12);
        (t * width).min(room).max(0.0)
    }

    fn f3(&self) -> HypothesisResult {
        let m = self.sys.m();
        if (0..m).any(|i| !self.sys.has_split(i)) {
            return self.na(Hypothesis::F3, "no split declared for every component");
        }
        let split = self.scan(|_, pt, _| {
            for i in 0..m {
                let f = tryo!(self.sys.eval_f(i, &pt.x, &pt.z, &pt.p), i, pt);
                let a = tryo!(self.sys.eval_part(i, Part::Lipschitz, &pt.x, &pt.z, &pt.p), i, pt);
                let b = tryo!(self.sys.eval_part(i, Part::Monotone, &pt.x, &pt.z, &pt.p), i, pt);
                if (f - (a + b)).abs() > 1e-12 * f.abs().max(1.0) {
                    return Outcome::Fail(Witness::SplitMismatch {
                        i,
                        x: pt.x.clone(),
                        z: pt.z.clone(),
                        p: pt.p.clone(),
                        f,
                        sum: a + b,
                    });
                }
            }
            Outcome::Ok
        });
        if split.is_some() {
            return self.result(Hypothesis::F3, split, None);
        }
        let mono = self.scan(|_, pt, aux| {
            for i in 0..m {
                let h = self.step_in_box(&pt.z, i, aux[0]);
                if h <= 0.0 {
                    continue;
                }
                let mut zh = pt.z.clone();
                zh[i] += h;
                let before = tryo!(self.sys.eval_part(i, Part::Monotone, &pt.x, &pt.z, &pt.p), i, pt);
                let after = tryo!(self.sys.eval_part(i, Part::Monotone, &pt.x, &zh, &pt.p), i, pt);
                if after > before && !close(before, after) {
                    return Outcome::Fail(Witness::Increasing {
                        i,
                        j: i,
                        monotone_part: true,
                        x: pt.x.clone(),
                        z: pt.z.clone(),
                        p: pt.p.clone(),
                        h,
                        before,
                        after,
                    });
                }
            }
            Outcome::Ok
        });
        if mono.is_some() {
            return self.result(Hypothesis::F3, mono, None);
        }
        self.lipschitz(Hypothesis::F3)
    }

    /// Quotient bounds at the three steps; failure when the finest exceeds
    /// ten times the coarsest, or exceeds a declared constant.
    fn lipschitz(&self, hyp: Hypothesis) -> HypothesisResult {
        let m = self.sys.m();
        let var = if hyp == Hypothesis::F3 { "z" } else { "p" };
        let outs = par::map_range(self.pts.len(), |k| {
            let pt = &self.pts[k];
            let mut est: f64 = 0.0;
            for i in 0..m {
                let q = |h| lip_quotient(self.sys, i, hyp == Hypothesis::F3, &pt.x, &pt.z, &pt.p, h);
                let (coarse, mid, fine) = match (q(1e-2), q(1e-3), q(1e-4)) {
                    (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                    (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return (eval_err(i, pt, e), est),
                };
                let local = coarse.max(mid).max(fine);
                est = est.max(local);
                if fine > 10.0 * coarse.max(1e-8) {
                    return (
                        Outcome::Fail(Witness::Unbounded {
                            i,
                            variable: var.into(),
                            x: pt.x.clone(),
                            z: pt.z.clone(),
                            p: pt.p.clone(),
                            coarse,
                            fine,
                        }),
                        est,
                    );
                }
                let declared = self.sys.spec().components[i].clone();
                let declared = if hyp == Hypothesis::F3 { declared.lipschitz_z } else { declared.lipschitz_p };
                if let Some(d) = declared {
                    if local > d * (1.0 + 1e-6) + 1e-12 {
                        return (
                            Outcome::Fail(Witness::ExceedsDeclared {
                                i,
                                variable: var.into(),
                                x: pt.x.clone(),
                                z: pt.z.clone(),
                                p: pt.p.clone(),
                                estimate: local,
                                declared: d,
                            }),
                            est,
                        );
                    }
                }
            }
            (Outcome::Ok, est)
        });
        let mut est = outs.iter().map(|o| o.1).fold(0.0, f64::max);
        let declared: Vec<Option<f64>> = self
            .sys
            .spec()
            .components
            .iter()
            .map(|c| if hyp == Hypothesis::F3 { c.lipschitz_z } else { c.lipschitz_p })
            .collect();
        if declared.iter().all(|d| d.is_some()) {
            est = declared.iter().flatten().cloned().fold(0.0, f64::max);
        }
        let first = outs.into_iter().map(|o| o.0).find(|o| !matches!(o, Outcome::Ok));
        self.result(hyp, first, Some(est))
    }

    fn f4(&self) -> HypothesisResult {
        let m = self.sys.m();
        let out = self.scan(|_, pt, aux| {
            for i in 0..m {
                for j in (0..m).filter(|j| *j != i) {
                    let h = self.step_in_box(&pt.z, j, aux[1 + j % (aux.len() - 1)]);
                    if h <= 0.0 {
                        continue;
                    }
                    let mut zh = pt.z.clone();
                    zh[j] += h;
                    let before = tryo!(self.sys.eval_f(i, &pt.x, &pt.z, &pt.p), i, pt);
                    let after = tryo!(self.sys.eval_f(i, &pt.x, &zh, &pt.p), i, pt);
                    if after > before && !close(before, after) {
                        return Outcome::Fail(Witness::Increasing {
                            i,
                            j,
                            monotone_part: false,
                            x: pt.x.clone(),
                            z: pt.z.clone(),
                            p: pt.p.clone(),
                            h,
                            before,
                            after,
                        });
                    }
                }
            }
            Outcome::Ok
        });
        self.result(Hypothesis::F4, out, None)
    }

    fn f6(&self) -> HypothesisResult {
        let [xlo, xhi] = self.bx.x[0];
        let [plo, phi] = self.bx.p[0];
        if xlo > 0.0 || plo > 0.0 {
            return self.na(Hypothesis::F6, "box has no points with x1 ≤ 0 and p1 ≤ 0");
        }
        let m = self.sys.m();
        let out = self.scan(|_, pt, aux| {
            // fold into x1 ≤ 0, p1 ≤ 0
            let mut x = pt.x.clone();
            let mut p = pt.p.clone();
            let frac = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            x[0] = xlo + frac(x[0], xlo, xhi) * (xhi.min(0.0) - xlo);
            p[0] = plo + frac(p[0], plo, phi) * (phi.min(0.0) - plo);
            let y1 = x[0] + aux[0] * (-2.0 * x[0]);
            let mut y = x.clone();
            y[0] = y1;
            let mut pb = p.clone();
            pb[0] = -pb[0];
            let local = Point {
                x: x.clone(),
                z: pt.z.clone(),
                p: p.clone(),
            };
            for i in 0..m {
                let lhs = tryo!(self.sys.eval_f(i, &y, &pt.z, &pb), i, &local);
                let rhs = tryo!(self.sys.eval_f(i, &x, &pt.z, &p), i, &local);
                if lhs < rhs && !close(lhs, rhs) {
                    return Outcome::Fail(Witness::Reflection {
                        i,
                        x,
                        y1,
                        z: pt.z.clone(),
                        p,
                        lhs,
                        rhs,
                    });
                }
            }
            Outcome::Ok
        });
        self.result(Hypothesis::F6, out, None)
    }

    fn f7(&self) -> HypothesisResult {
        let m = self.sys.m();
        let out = self.scan(|_, pt, _| {
            for i in 0..m {
                let lhs = tryo!(self.sys.eval_f(i, &pt.x, &pt.z, &pt.p), i, pt);
                let rhs = tryo!(self.sys.eval_f(i, &flip(&pt.x), &pt.z, &flip(&pt.p)), i, pt);
                if !close(lhs, rhs) {
                    return Outcome::Fail(Witness::SignFlip {
                        i,
                        x: pt.x.clone(),
                        z: pt.z.clone(),
                        p: pt.p.clone(),
                        lhs,
                        rhs,
                    });
                }
            }
            Outcome::Ok
        });
        self.result(Hypothesis::F7, out, None)
    }

    fn f8(&self) -> HypothesisResult {
        let m = self.sys.m();
        let n = self.sys.dim();
        let out = self.scan(|k, pt, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
            let o_x = random_orthogonal(n, &mut rng);
            let o_p = random_orthogonal(n, &mut rng);
            let ox = matvec(&o_x, &pt.x);
            let op = matvec(&o_p, &pt.p);
            for i in 0..m {
                let lhs = tryo!(self.sys.eval_f(i, &pt.x, &pt.z, &pt.p), i, pt);
                let rhs = tryo!(self.sys.eval_f(i, &ox, &pt.z, &op), i, pt);
                if !close(lhs, rhs) {
                    return Outcome::Fail(Witness::Rotation {
                        i,
                        x: pt.x.clone(),
                        z: pt.z.clone(),
                        p: pt.p.clone(),
                        o_x,
                        o_p,
                        lhs,
                        rhs,
                    });
                }
            }
            Outcome::Ok
        });
        self.result(Hypothesis::F8, out, None)
    }

    fn dij_sign(&self) -> HypothesisResult {
        let m = self.sys.m();
        if (0..m).any(|i| !self.sys.has_split(i)) {
            return self.na(Hypothesis::DijSign, "diagonal quotients need a declared split");
        }
        let out = self.scan(|_, pt, aux| {
            for i in 0..m {
                for j in 0..m {
                    // signed step, kept inside the box
                    let [lo, hi] = self.bx.z[j];
                    let t = 2.0 * aux[(i * m + j) % aux.len()] - 1.0;
                    let h = if t >= 0.0 { t * (hi - pt.z[j]) } else { -t * (lo - pt.z[j]) };
                    let d = tryo!(self.sys.d_ij(i, j, &pt.x, &pt.z, &pt.p, h), i, pt);
                    if d > REL_TOL * d.abs().max(1.0) {
                        return Outcome::Fail(Witness::PositiveQuotient {
                            i,
                            j,
                            x: pt.x.clone(),
                            z: pt.z.clone(),
                            p: pt.p.clone(),
                            h,
                            d,
                        });
                    }
                }
            }
            Outcome::Ok
        });
        self.result(Hypothesis::DijSign, out, None)
    }
}

/// Checks the requested hypotheses on `samples` quasi-random points of the
/// box. For up to twelve box dimensions every box corner is sampled as well.
pub fn check_hypotheses(
    sys: &RhsSystem,
    sample_box: &SampleBox,
    samples: usize,
    which: &[Hypothesis],
    seed: u64,
) -> Result<HypothesisReport> {
    sample_box.validate(sys)?;
    if samples == 0 {
        return Err(Error::invalid("samples must be ≥ 1"));
    }
    let d = sample_box.dims();
    let n_aux = sys.m() * sys.m() + 2;
    let raw = halton(samples, d + n_aux, seed);
    let mut pts: Vec<Point> = raw.iter().map(|u| sample_box.point(&u[..d])).collect();
    let mut aux: Vec<Vec<f64>> = raw.iter().map(|u| u[d..].to_vec()).collect();
    if d <= 12 {
        for c in 0..(1usize << d) {
            let u: Vec<f64> = (0..d).map(|b| ((c >> b) & 1) as f64).collect();
            pts.push(sample_box.point(&u));
            aux.push(vec![0.5; n_aux]);
        }
    }
    let ctx = Ctx {
        sys,
        bx: sample_box,
        pts,
        aux,
        seed,
    };
    let mut which: Vec<Hypothesis> = which.to_vec();
    which.sort();
    which.dedup();
    let results = which
        .iter()
        .map(|h| match h {
            Hypothesis::F1 | Hypothesis::F2 => ctx.positivity(*h),
            Hypothesis::F3 => ctx.f3(),
            Hypothesis::F4 => ctx.f4(),
            Hypothesis::F5 => ctx.lipschitz(Hypothesis::F5),
            Hypothesis::F6 => ctx.f6(),
            Hypothesis::F7 => ctx.f7(),
            Hypothesis::F8 => ctx.f8(),
            Hypothesis::DijSign => ctx.dij_sign(),
        })
        .collect();
    Ok(HypothesisReport {
        sample_box: sample_box.clone(),
        samples,
        seed,
        results,
    })
}
