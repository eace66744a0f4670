//! Synthetic sequences of correlated pencils and the angles between
//! matched eigenvectors of neighbouring problems.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, dotc, hermitian_eig, matmul, qr_orthonormalize, DenseMatrix, EigWant,
    HermitianView, LowerTriangular, Op,
};
use crate::reduction::{back_transform, to_standard, EigenPencil, EigenSolution, SolutionForm};

/// Halvings of a `B` perturbation tried before giving up on positive definiteness.
const B_RETRIES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSchedule {
    pub length: usize,
    /// `ε_ℓ` for the step from problem `ℓ` to `ℓ+1`; `length − 1` entries.
    pub eps: Vec<f64>,
    pub perturb_b: bool,
    pub b_cond_target: f64,
    /// Scale every `A` by `1/ρ(H⁽¹⁾)` so the spectra are of unit size.
    pub normalize: bool,
}

impl CorrelationSchedule {
    /// `ε_ℓ = eps0 · decay^ℓ`, `ℓ = 1..length−1`.
    pub fn geometric(length: usize, eps0: f64, decay: f64) -> Self {
        Self {
            length,
            eps: (1..length).map(|l| eps0 * decay.powi(l as i32)).collect(),
            perturb_b: true,
            b_cond_target: 1e6,
            normalize: true,
        }
    }

    pub fn with_default_decay(length: usize) -> Self {
        Self::geometric(length, 0.5, 0.6)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidConfig("sequence length must be at least 1".into()));
        }
        if self.eps.len() + 1 != self.length {
            return Err(Error::InvalidConfig(format!(
                "{} perturbation sizes for a sequence of length {}",
                self.eps.len(),
                self.length
            )));
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidConfig("perturbation sizes must be finite and >= 0".into()));
        }
        if !(self.b_cond_target >= 1.0 && self.b_cond_target.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "condition target must be >= 1, got {}",
                self.b_cond_target
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Generated { schedule: CorrelationSchedule, seed: u64 },
    Loaded { path: String },
}

#[derive(Clone, Debug)]
pub struct PencilSequence {
    pub pencils: Vec<EigenPencil>,
    pub provenance: Provenance,
}

impl PencilSequence {
    /// Checks labels `1..=N` and a common dimension.
    pub fn new(pencils: Vec<EigenPencil>, provenance: Provenance) -> Result<Self> {
        if pencils.is_empty() {
            return Err(Error::InvalidConfig("empty pencil sequence".into()));
        }
        let n = pencils[0].n();
        for (i, p) in pencils.iter().enumerate() {
            if p.label != i + 1 {
                return Err(Error::InvalidConfig(format!(
                    "pencil {i} carries label {}, expected {}",
                    p.label,
                    i + 1
                )));
            }
            if p.n() != n {
                return Err(Error::dims(format!("pencil {} is {}x{}, expected {n}", p.label, p.n(), p.n())));
            }
        }
        Ok(Self { pencils, provenance })
    }

    pub fn len(&self) -> usize {
        self.pencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pencils.is_empty()
    }

    pub fn n(&self) -> usize {
        self.pencils[0].n()
    }

    /// Pencil with label `ell` (1-based).
    pub fn get(&self, ell: usize) -> Option<&EigenPencil> {
        ell.checked_sub(1).and_then(|i| self.pencils.get(i))
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Hermitian matrix with unit-variance complex Gaussian off-diagonal
/// entries and real standard normal diagonal.
fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        m[(j, j)] = Complex64::new(gaussian(rng), 0.0);
        for i in 0..j {
            let z = Complex64::new(gaussian(rng) * s, gaussian(rng) * s);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn unit_max_norm_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseMatrix {
    let mut m = random_hermitian(n, rng);
    let peak = m.max_abs();
    if peak > 0.0 {
        m.scale_real_mut(1.0 / peak);
    }
    m
}

/// Haar-distributed unitary: QR of a Gaussian block with `diag(R) > 0`.
fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DenseMatrix> {
    let g = DenseMatrix::random_gaussian(n, n, rng);
    let mut q = qr_orthonormalize(&g)?;
    for j in 0..n {
        let r = dotc(q.col(j), g.col(j));
        let phase = if r.norm() > 0.0 { r / r.norm() } else { Complex64::new(1.0, 0.0) };
        q.col_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    Ok(q)
}

/// `U·diag(σ)·Uᴴ` with `σ` log-spaced over `[1, cond]`.
fn spd_with_condition<R: Rng + ?Sized>(n: usize, cond: f64, rng: &mut R) -> Result<DenseMatrix> {
    let u = haar_unitary(n, rng)?;
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            cond.powf(t)
        })
        .collect();
    let mut us = u.clone();
    us.scale_columns_mut(&sigma);
    let mut b = matmul(&us, Op::None, &u, Op::Adjoint);
    b.symmetrize();
    Ok(b)
}

/// `N` pencils where each `A` (and, weaker, each `B`) is a small random
/// Hermitian perturbation of its predecessor.
pub fn generate_sequence(n: usize, schedule: &CorrelationSchedule, seed: u64) -> Result<PencilSequence> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("sequence dimension must be >= 4, got {n}")));
    }
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = random_hermitian(n, &mut rng);
    let mut b = spd_with_condition(n, schedule.b_cond_target, &mut rng)?;
    let mut mats = vec![(a.clone(), b.clone())];

    for (step, &eps) in schedule.eps.iter().enumerate() {
        a.add_scaled_mut(Complex64::new(eps, 0.0), &unit_max_norm_hermitian(n, &mut rng));
        if schedule.perturb_b {
            let db = unit_max_norm_hermitian(n, &mut rng);
            let mut size = eps / 10.0;
            let mut accepted = None;
            for _ in 0..=B_RETRIES {
                let mut cand = b.clone();
                cand.add_scaled_mut(Complex64::new(size, 0.0), &db);
                cand.symmetrize();
                if cholesky(&HermitianView::new(cand.clone())?).is_ok() {
                    accepted = Some(cand);
                    break;
                }
                size /= 2.0;
            }
            b = accepted.ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "B perturbation at step {} breaks positive definiteness after {B_RETRIES} halvings",
                    step + 1
                ))
            })?;
        }
        mats.push((a.clone(), b.clone()));
    }

    let scale = if schedule.normalize {
        let (a1, b1) = &mats[0];
        let first = EigenPencil::new(HermitianView::new(a1.clone())?, HermitianView::new(b1.clone())?, 1)?;
        let values = hermitian_eig(&to_standard(&first)?.h, EigWant::ValuesOnly)?.values;
        let rho = values[0].abs().max(values[n - 1].abs());
        if rho > 0.0 {
            1.0 / rho
        } else {
            1.0
        }
    } else {
        1.0
    };

    let pencils = mats
        .into_iter()
        .enumerate()
        .map(|(i, (mut a, b))| {
            if scale != 1.0 {
                a.scale_real_mut(scale);
            }
            EigenPencil::new(HermitianView::new(a)?, HermitianView::new(b)?, i + 1)
        })
        .collect::<Result<Vec<_>>>()?;
    PencilSequence::new(
        pencils,
        Provenance::Generated { schedule: schedule.clone(), seed },
    )
}

/// Correspondence between the vectors of two neighbouring solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `permutation[i]` is the column of the next solution matched to column `i`.
    pub permutation: Vec<usize>,
    /// Angle in radians for each matched pair.
    pub angles: Vec<f64>,
}

/// Matches every vector of `prev` to a distinct vector of `next` through
/// the cross-Gram `M = (L_prevᴴ X_prev)ᴴ (L_nextᴴ X_next)`, taking the
/// largest remaining `|M_ij|` first.
pub fn match_eigenvectors(
    prev: &EigenSolution,
    l_prev: &LowerTriangular,
    next: &EigenSolution,
    l_next: &LowerTriangular,
) -> Result<Matching> {
    let xp = generalized_vectors(prev, l_prev)?;
    let xn = generalized_vectors(next, l_next)?;
    if xp.rows() != xn.rows() {
        return Err(Error::dims(format!(
            "solutions have {} and {} rows",
            xp.rows(),
            xn.rows()
        )));
    }
    if xp.cols() > xn.cols() {
        return Err(Error::dims(format!(
            "cannot match {} vectors into {}",
            xp.cols(),
            xn.cols()
        )));
    }
    let yp = matmul(l_prev.as_matrix(), Op::Adjoint, &xp, Op::None);
    let yn = matmul(l_next.as_matrix(), Op::Adjoint, &xn, Op::None);
    let m = matmul(&yp, Op::Adjoint, &yn, Op::None);
    Ok(greedy_match(&m))
}

fn generalized_vectors(sol: &EigenSolution, l: &LowerTriangular) -> Result<DenseMatrix> {
    match sol.form {
        SolutionForm::Standard => Ok(back_transform(l, sol)?.vectors),
        SolutionForm::Generalized => Ok(sol.vectors.clone()),
    }
}

fn greedy_match(m: &DenseMatrix) -> Matching {
    let (rows, cols) = (m.rows(), m.cols());
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            entries.push((m[(i, j)].norm(), i, j));
        }
    }
    // Descending magnitude; ties broken by row, then column.
    entries.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut permutation = vec![usize::MAX; rows];
    let mut angles = vec![0.0; rows];
    let mut used = vec![false; cols];
    let mut left = rows;
    for (mag, i, j) in entries {
        if left == 0 {
            break;
        }
        if permutation[i] != usize::MAX || used[j] {
            continue;
        }
        permutation[i] = j;
        angles[i] = mag.min(1.0).acos();
        used[j] = true;
        left -= 1;
    }
    Matching { permutation, angles }
}

/// Angles between the problem `ell − 1` and `ell` solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexAngles {
    pub ell: usize,
    pub matching: Matching,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub tracked: usize,
    pub per_index: Vec<IndexAngles>,
}

impl AngleReport {
    pub fn medians(&self) -> Vec<f64> {
        self.per_index.iter().map(|x| x.median).collect()
    }
}

/// Deviation angles of the lowest `⌈fraction · nev⌉` eigenvectors along the
/// sequence. `solutions` must hold one solution per label `1..=N`.
pub fn angle_report(seq: &PencilSequence, solutions: &[EigenSolution], fraction: f64) -> Result<AngleReport> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let by_label = |ell: usize| {
        solutions
            .iter()
            .find(|s| s.label == ell)
            .ok_or(Error::MissingSolution(ell))
    };
    let ordered = (1..=seq.len()).map(by_label).collect::<Result<Vec<_>>>()?;
    let nev = ordered.iter().map(|s| s.nev()).min().unwrap_or(0);
    let tracked = ((fraction * nev as f64).ceil() as usize).clamp(usize::from(nev > 0), nev);
    let factors = seq
        .pencils
        .iter()
        .map(|p| cholesky(&p.b))
        .collect::<Result<Vec<_>>>()?;

    let mut per_index = Vec::with_capacity(seq.len().saturating_sub(1));
    for ell in 2..=seq.len() {
        let prev = ordered[ell - 2];
        let head = EigenSolution {
            values: prev.values[..tracked].to_vec(),
            vectors: prev.vectors.columns(0..tracked),
            form: prev.form,
            label: prev.label,
        };
        let matching = match_eigenvectors(&head, &factors[ell - 2], ordered[ell - 1], &factors[ell - 1])?;
        let median = median(&matching.angles);
        per_index.push(IndexAngles { ell, matching, median });
    }
    Ok(AngleReport { tracked, per_index })
}

/// Median of a sample (mean of the two central values for even sizes); 0 when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
