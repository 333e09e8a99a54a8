//! Online dictionary learning: partial-DCT initialization, running statistic
//! accumulation, block-coordinate atom updates with warm restarts, the
//! streaming learning loop with per-image snapshots, binary serialization,
//! and mosaic rendering.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::patch::{extract_patches, plan_grid, PatchMatrix};
use crate::solvers::{solve, BpdnProblem, Method, SolverConfig};

/// Column-norm slack tolerated on the unit-ball constraint.
const NORM_SLACK: f64 = 1e-12;

/// Atoms whose accumulated code energy is at or below this are not updated.
const ATOM_SKIP_THRESHOLD: f64 = 1e-12;

/// An m x n dictionary whose columns (atoms) lie in the unit Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::Argument("dictionary must be at least 1x1".into()));
        }
        for (j, col) in atoms.columns().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if !(norm <= 1.0 + NORM_SLACK) {
                return Err(Error::Argument(format!(
                    "atom {j} has norm {norm} outside the unit ball"
                )));
            }
        }
        if atoms.nrows() > atoms.ncols() {
            log::warn!(
                "dictionary {}x{} is undercomplete (fewer atoms than the signal dimension)",
                atoms.nrows(),
                atoms.ncols()
            );
        }
        Ok(Self { atoms })
    }

    /// Patch dimension (rows).
    pub fn m(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count (columns).
    pub fn n(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &Array2<f64> {
        &self.atoms
    }
}

/// Partial 2-D discrete cosine dictionary.
///
/// Takes the first `sqrt(m)` sample rows of a length-`sqrt(n)` cosine basis
/// and forms all pairwise Kronecker products, normalizing each column. The
/// first atom is the constant (DC) atom; when `n == m` the result is the
/// complete orthonormal 2-D DCT.
pub fn init_dct_dictionary(m: usize, n: usize) -> Result<Dictionary> {
    let patch = exact_sqrt(m)
        .ok_or_else(|| Error::Argument(format!("patch dimension {m} is not a perfect square")))?;
    let k = exact_sqrt(n)
        .ok_or_else(|| Error::Argument(format!("atom count {n} is not a perfect square")))?;
    if k < patch {
        return Err(Error::Argument(format!(
            "atom grid {k} must be at least the patch side {patch}"
        )));
    }

    // w[t, j] = cos(pi * j * (2t + 1) / (2k)), t restricted to the patch side
    let mut w = Array2::<f64>::zeros((patch, k));
    for t in 0..patch {
        for j in 0..k {
            w[[t, j]] = (std::f64::consts::PI * j as f64 * (2 * t + 1) as f64 / (2 * k) as f64).cos();
        }
    }

    let mut atoms = Array2::<f64>::zeros((m, n));
    for j1 in 0..k {
        for j2 in 0..k {
            let col = j1 * k + j2;
            for t1 in 0..patch {
                for t2 in 0..patch {
                    atoms[[t1 * patch + t2, col]] = w[[t1, j1]] * w[[t2, j2]];
                }
            }
            let norm = atoms.column(col).dot(&atoms.column(col)).sqrt();
            atoms.column_mut(col).mapv_inplace(|v| v / norm);
        }
    }
    Dictionary::new(atoms)
}

fn exact_sqrt(v: usize) -> Option<usize> {
    let r = (v as f64).sqrt().round() as usize;
    (r * r == v && r > 0).then_some(r)
}

/// Running sufficient statistics of the codes seen so far:
/// `gram = sum x_i x_i^T` (n x n) and `cross = sum p_i x_i^T` (m x n).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnState {
    gram: Array2<f64>,
    cross: Array2<f64>,
    steps: usize,
}

impl LearnState {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            gram: Array2::zeros((n, n)),
            cross: Array2::zeros((m, n)),
            steps: 0,
        }
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &Array2<f64> {
        &self.cross
    }

    /// Number of accumulated (code, patch) pairs.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Rank-one update with one coded patch.
    pub fn accumulate(&mut self, code: &Array1<f64>, patch: &Array1<f64>) -> Result<()> {
        let n = self.gram.nrows();
        let m = self.cross.nrows();
        if code.len() != n || patch.len() != m {
            return Err(Error::Argument(format!(
                "accumulate: code {} / patch {} does not match state {n} / {m}",
                code.len(),
                patch.len()
            )));
        }
        for (i, &ci) in code.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for (j, &cj) in code.iter().enumerate() {
                self.gram[[i, j]] += ci * cj;
            }
            for (row, &pv) in patch.iter().enumerate() {
                self.cross[[row, i]] += pv * ci;
            }
        }
        self.steps += 1;
        Ok(())
    }
}

fn check_state_dims(dict: &Dictionary, state: &LearnState) -> Result<()> {
    if state.gram.nrows() != dict.n() || state.cross.nrows() != dict.m() {
        return Err(Error::Argument(format!(
            "state dimensions ({}x{} gram, {}x{} cross) do not match dictionary {}x{}",
            state.gram.nrows(),
            state.gram.ncols(),
            state.cross.nrows(),
            state.cross.ncols(),
            dict.m(),
            dict.n()
        )));
    }
    Ok(())
}

fn update_atoms_in_place(atoms: &mut Array2<f64>, state: &LearnState, sweeps: usize) {
    let (m, n) = (atoms.nrows(), atoms.ncols());
    for _ in 0..sweeps {
        for j in 0..n {
            let energy = state.gram[[j, j]];
            if energy <= ATOM_SKIP_THRESHOLD {
                continue;
            }
            // u_j = (b_j - D a_j) / A_jj + d_j, then project onto the unit ball
            let da = atoms.dot(&state.gram.column(j));
            let mut u = Array1::<f64>::zeros(m);
            let mut norm_sq = 0.0;
            for i in 0..m {
                let v = (state.cross[[i, j]] - da[i]) / energy + atoms[[i, j]];
                u[i] = v;
                norm_sq += v * v;
            }
            let scale = 1.0 / norm_sq.sqrt().max(1.0);
            for i in 0..m {
                atoms[[i, j]] = u[i] * scale;
            }
        }
    }
}

/// Block-coordinate dictionary update: one pass re-optimizes each atom with
/// accumulated code energy, projecting back onto the unit ball. Atoms that
/// never contributed to a code are left untouched.
pub fn update_dictionary(dict: &Dictionary, state: &LearnState, sweeps: usize) -> Result<Dictionary> {
    check_state_dims(dict, state)?;
    let mut atoms = dict.atoms.clone();
    update_atoms_in_place(&mut atoms, state, sweeps);
    Ok(Dictionary { atoms })
}

/// The quadratic surrogate minimized by the dictionary update:
/// `(0.5 Tr(D^T D A) - Tr(D^T B)) / k`.
pub fn surrogate_objective(dict: &Dictionary, state: &LearnState) -> Result<f64> {
    check_state_dims(dict, state)?;
    if state.steps == 0 {
        return Err(Error::Degenerate("no accumulated statistics".into()));
    }
    let da = dict.atoms.dot(&state.gram);
    let quad: f64 = dict.atoms.iter().zip(da.iter()).map(|(d, v)| d * v).sum();
    let lin: f64 = dict.atoms.iter().zip(state.cross.iter()).map(|(d, b)| d * b).sum();
    Ok((0.5 * quad - lin) / state.steps as f64)
}

/// Gradient of the unnormalized surrogate: `D A - B`.
pub fn surrogate_gradient(dict: &Dictionary, state: &LearnState) -> Result<Array2<f64>> {
    check_state_dims(dict, state)?;
    Ok(dict.atoms.dot(&state.gram) - &state.cross)
}

// ---------------------------------------------------------------------------
// Online learning loop
// ---------------------------------------------------------------------------

/// Order in which patches are drawn from the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawOrder {
    /// Image by image, anchors row-major: fully deterministic.
    Ordered,
    /// A seeded global shuffle of the whole patch sequence.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct LearnConfig {
    /// Penalty weight of the coding subproblem.
    pub mu: f64,
    pub solver: SolverConfig,
    pub patch: usize,
    pub overlap: f64,
    pub draw_order: DrawOrder,
    /// Block-coordinate sweeps after each coded patch.
    pub update_sweeps: usize,
    /// Snapshot interval in patches; `None` snapshots at image boundaries.
    pub snapshot_every: Option<usize>,
}

impl LearnConfig {
    pub fn new(method: Method) -> Self {
        Self {
            mu: (2.0f64).powi(-8),
            solver: SolverConfig::learning(method),
            patch: 6,
            overlap: 0.5,
            draw_order: DrawOrder::Ordered,
            update_sweeps: 1,
            snapshot_every: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if self.update_sweeps == 0 {
            return Err(Error::Config("update_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a learning run.
#[derive(Debug, Clone)]
pub struct LearnRun {
    /// Dictionary stages; index 0 is the initial dictionary, followed by one
    /// snapshot per boundary.
    pub snapshots: Vec<Dictionary>,
    /// Patches drawn (the paper-protocol N).
    pub coding_steps: usize,
    /// Patches skipped because the solver diverged on them.
    pub skipped_patches: usize,
}

impl LearnRun {
    pub fn final_dictionary(&self) -> &Dictionary {
        self.snapshots.last().expect("snapshots always contain the start")
    }
}

/// Learn from pre-extracted patch sets; boundaries fall between sets.
pub fn learn_from_patches(
    sets: &[PatchMatrix],
    cfg: &LearnConfig,
    d0: &Dictionary,
) -> Result<LearnRun> {
    cfg.validate()?;
    for (i, set) in sets.iter().enumerate() {
        if set.patch_len() != d0.m() {
            return Err(Error::Argument(format!(
                "patch set {i} has patch length {} but the dictionary expects {}",
                set.patch_len(),
                d0.m()
            )));
        }
    }

    let mut sequence: Vec<(usize, usize)> = Vec::new();
    let mut boundaries: Vec<usize> = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        for c in 0..set.count() {
            sequence.push((i, c));
        }
        boundaries.push(sequence.len());
    }
    if let DrawOrder::Shuffled { seed } = cfg.draw_order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sequence.shuffle(&mut rng);
    }
    if let Some(every) = cfg.snapshot_every {
        if every == 0 {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        boundaries = (every..=sequence.len()).step_by(every).collect();
        if boundaries.last() != Some(&sequence.len()) && !sequence.is_empty() {
            boundaries.push(sequence.len());
        }
    }

    let mut dict = d0.clone();
    let mut state = LearnState::new(d0.m(), d0.n());
    let mut snapshots = vec![d0.clone()];
    let mut skipped = 0usize;
    let mut boundary_iter = boundaries.iter().copied().peekable();

    for (step, &(set_idx, col)) in sequence.iter().enumerate() {
        let patch = sets[set_idx].columns.column(col).to_owned();
        let problem = BpdnProblem::new(dict.atoms.clone(), patch.clone(), cfg.mu)?;
        match solve(&problem, &cfg.solver) {
            Ok(code) => {
                state.accumulate(&code.x, &patch)?;
                update_atoms_in_place(&mut dict.atoms, &state, cfg.update_sweeps);
            }
            Err(Error::Divergence(msg)) | Err(Error::Stagnation(msg)) => {
                log::warn!("skipping patch {col} of set {set_idx}: {msg}");
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
        while boundary_iter.peek() == Some(&(step + 1)) {
            boundary_iter.next();
            snapshots.push(dict.clone());
        }
    }

    Ok(LearnRun {
        snapshots,
        coding_steps: sequence.len(),
        skipped_patches: skipped,
    })
}

/// Learn a dictionary online from a set of training images, snapshotting the
/// stage sequence at image boundaries.
pub fn learn_online(images: &[GrayImage], cfg: &LearnConfig, d0: &Dictionary) -> Result<LearnRun> {
    cfg.validate()?;
    if d0.m() != cfg.patch * cfg.patch {
        return Err(Error::Argument(format!(
            "dictionary rows {} do not match the {}x{} patch area",
            d0.m(),
            cfg.patch,
            cfg.patch
        )));
    }
    let mut sets = Vec::with_capacity(images.len());
    for img in images {
        let plan = plan_grid(img.height(), img.width(), cfg.patch, cfg.overlap)?;
        sets.push(extract_patches(img, &plan)?);
    }
    learn_from_patches(&sets, cfg, d0)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"SDIC";
const FORMAT_VERSION: u32 = 1;

/// Encode a dictionary: magic, version, dimensions, then column-major 64-bit
/// floats, all little-endian. Round-trips bit-exactly.
pub fn save_dictionary(dict: &Dictionary) -> Vec<u8> {
    let (m, n) = (dict.m(), dict.n());
    let mut out = Vec::with_capacity(16 + 8 * m * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for col in dict.atoms.columns() {
        for &v in col.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_dictionary(bytes: &[u8]) -> Result<Dictionary> {
    if bytes.len() < 16 {
        return Err(Error::Truncated {
            expected: 16,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad dictionary magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dictionary version {version}")));
    }
    let m = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if m == 0 || n == 0 {
        return Err(Error::Format("zero dictionary dimension".into()));
    }
    let count = m
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("dimension overflow {m}x{n}")))?;
    let expected = 16 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!(
            "trailing bytes: expected {expected}, got {}",
            bytes.len()
        )));
    }
    let mut atoms = Array2::<f64>::zeros((m, n));
    let mut off = 16;
    for j in 0..n {
        for i in 0..m {
            atoms[[i, j]] = f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
            off += 8;
        }
    }
    Dictionary::new(atoms)
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Tile the atoms into a grayscale mosaic, each atom affinely rescaled to the
/// full tonal range (flat atoms map to mid-gray), with 1-pixel separators.
pub fn render_dictionary_mosaic(dict: &Dictionary, tile_cols: usize) -> Result<GrayImage> {
    let side = exact_sqrt(dict.m()).ok_or_else(|| {
        Error::Argument(format!("patch dimension {} is not a perfect square", dict.m()))
    })?;
    if tile_cols == 0 {
        return Err(Error::Argument("tile_cols must be >= 1".into()));
    }
    let tile_rows = dict.n().div_ceil(tile_cols);
    let height = tile_rows * (side + 1) + 1;
    let width = tile_cols * (side + 1) + 1;
    let mut canvas = Array2::<f64>::zeros((height, width));

    for j in 0..dict.n() {
        let atom = dict.atoms.column(j);
        let lo = atom.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = atom.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let y0 = (j / tile_cols) * (side + 1) + 1;
        let x0 = (j % tile_cols) * (side + 1) + 1;
        for t1 in 0..side {
            for t2 in 0..side {
                let v = atom[t1 * side + t2];
                canvas[[y0 + t1, x0 + t2]] = if range <= f64::EPSILON * hi.abs().max(1.0) {
                    127.5
                } else {
                    (v - lo) / range * 255.0
                };
            }
        }
    }
    GrayImage::new(canvas)
}

#[cfg(test)]
mod tests;
