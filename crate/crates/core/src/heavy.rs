//! The heavy-hitters extension.
//!
//! Dictionary histograms are too large to track directly, so each user
//! sketches their epoch histogram through a shared ±1/√w sign projection
//! and votes on drift in hash space (∞-norm against the same threshold
//! ladder machinery as the bit protocol). Estimates travel as one-sparse
//! randomized reports; their running mean together with the projection
//! forms a frequency oracle answering f̂(v) = ⟨Φe_v, ỹ⟩ for any value.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bernoulli::{budget_allows, confidence_from_gap, decide_global_update, vote_core};
use crate::params::{NoiseLevels, ProtocolParams, SlackMode};
use crate::rng::{self, StreamDomain};

/// Seeded w×d sign projection with entries ±1/√w.
///
/// Entries are a pure function of (seed, row, column), evaluated through a
/// counter-mode mixer, so the matrix is never materialized unless a dense
/// cache is explicitly requested; the dictionary may be arbitrarily large.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    width: usize,
    dict: usize,
    seed: u64,
    inv_sqrt_w: f64,
    dense: Option<Vec<i8>>, // column-major signs, dense[col * width + row]
}

/// Build the projection for `width` rows over a `dict`-value dictionary.
pub fn gen_proj(width: usize, dict: usize, seed: u64) -> ProjectionMatrix {
    assert!(width >= 1 && dict >= 1);
    ProjectionMatrix {
        width,
        dict,
        seed,
        inv_sqrt_w: 1.0 / (width as f64).sqrt(),
        dense: None,
    }
}

impl ProjectionMatrix {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dict(&self) -> usize {
        self.dict
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn prf_sign(&self, row: usize, col: usize) -> i8 {
        // SplitMix64 evaluated at counter idx: golden-ratio Weyl step, then
        // the full-avalanche finalizer.
        let idx = (row as u64).wrapping_mul(self.dict as u64).wrapping_add(col as u64);
        let state = rng::mix64(self.seed ^ 0x9e3779b97f4a7c15)
            .wrapping_add(idx.wrapping_mul(0x9e3779b97f4a7c15));
        if rng::mix64(state) >> 63 == 0 {
            1
        } else {
            -1
        }
    }

    /// Sign of entry (row, col), in {+1, −1}.
    pub fn sign(&self, row: usize, col: usize) -> i8 {
        assert!(row < self.width && col < self.dict);
        match &self.dense {
            Some(d) => d[col * self.width + row],
            None => self.prf_sign(row, col),
        }
    }

    /// Entry (row, col), in {+1/√w, −1/√w}.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.sign(row, col) as f64 * self.inv_sqrt_w
    }

    /// Column for dictionary value `v` (the hash of the basis vector e_v).
    pub fn column(&self, v: usize) -> Vec<f64> {
        (0..self.width).map(|j| self.entry(j, v)).collect()
    }

    /// Precompute all signs column-major. Worth it when the protocol will
    /// hash many histograms against the same matrix; refuse nothing, the
    /// caller controls the memory trade.
    pub fn materialize(&mut self) {
        if self.dense.is_some() {
            return;
        }
        let width = self.width;
        let mut dense = vec![0i8; width * self.dict];
        dense
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(col, chunk)| {
                for (row, slot) in chunk.iter_mut().enumerate() {
                    *slot = self.prf_sign(row, col);
                }
            });
        self.dense = Some(dense);
    }

    fn dense_column(&self, v: usize) -> Option<&[i8]> {
        self.dense
            .as_ref()
            .map(|d| &d[v * self.width..(v + 1) * self.width])
    }
}

/// Empirical distribution of one epoch's samples over [0, dict).
pub fn epoch_histogram(samples: &[usize], dict: usize, epoch_len: usize) -> Vec<f64> {
    assert_eq!(
        samples.len(),
        epoch_len,
        "epoch data must contain exactly ell samples"
    );
    let mut hist = vec![0.0f64; dict];
    let unit = 1.0 / epoch_len as f64;
    for &v in samples {
        assert!(v < dict, "sample {v} outside the dictionary [0, {dict})");
        hist[v] += unit;
    }
    hist
}

/// Hash a probability histogram: ŷ = Φ p̂. Every output coordinate is a
/// convex combination of ±1/√w entries, hence within [−1/√w, +1/√w].
pub fn hash_histogram(proj: &ProjectionMatrix, hist: &[f64]) -> Vec<f64> {
    assert_eq!(hist.len(), proj.dict, "histogram length must equal d");
    let total: f64 = hist.iter().sum();
    assert!(
        (total - 1.0).abs() < 1e-9 && hist.iter().all(|&p| p >= 0.0),
        "input must be a probability vector"
    );
    let mut acc = vec![0.0f64; proj.width];
    for (v, &p) in hist.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        match proj.dense_column(v) {
            Some(col) => {
                for (slot, &s) in acc.iter_mut().zip(col) {
                    *slot += p * s as f64;
                }
            }
            None => {
                for (j, slot) in acc.iter_mut().enumerate() {
                    *slot += p * proj.prf_sign(j, v) as f64;
                }
            }
        }
    }
    for slot in acc.iter_mut() {
        *slot *= proj.inv_sqrt_w;
    }
    acc
}

/// Confidence level from hash drift: highest b with ‖ŷ − ŷ_last‖∞ > T_b.
pub fn heavy_confidence(
    y_cur: &[f64],
    y_last: Option<&[f64]>,
    thresholds: &[f64],
) -> Option<i32> {
    let gap = y_last.map(|last| {
        assert_eq!(last.len(), y_cur.len());
        y_cur
            .iter()
            .zip(last)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    });
    confidence_from_gap(gap, thresholds)
}

/// A one-sparse randomized report: coordinate `coord` holds ±c_ε√w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedReport {
    pub width: usize,
    pub coord: usize,
    pub value: f64,
}

impl RandomizedReport {
    /// Dense form, for tests and aggregation checks.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.width];
        v[self.coord] = self.value;
        v
    }
}

/// Report scale c_ε√w with c_ε = (e^b+1)/(e^b−1).
pub fn report_scale(est_noise: f64, width: usize) -> f64 {
    let eb = est_noise.exp();
    (eb + 1.0) / (eb - 1.0) * (width as f64).sqrt()
}

/// The client randomizer: pick one uniform coordinate and release its sign
/// with bias h_j√w/(2c_ε). A zero input (non-participation, or a histogram
/// that genuinely hashes to zero) releases a fair sign.
pub fn randomize_hash(h: &[f64], est_noise: f64, rng: &mut ChaCha8Rng) -> RandomizedReport {
    let width = h.len();
    let inv_sqrt_w = 1.0 / (width as f64).sqrt();
    let coord = rng.gen_range(0..width);
    let scale = report_scale(est_noise, width);
    if h.iter().all(|&x| x == 0.0) {
        let sign = if rng.gen::<f64>() < 0.5 { 1.0 } else { -1.0 };
        return RandomizedReport {
            width,
            coord,
            value: sign * scale,
        };
    }
    let max_abs = h.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    assert!(
        max_abs <= inv_sqrt_w * (1.0 + 1e-9),
        "hash out of range: ||h||_inf = {max_abs} > 1/sqrt(w) = {inv_sqrt_w}"
    );
    let c_eps = (est_noise.exp() + 1.0) / (est_noise.exp() - 1.0);
    let p_plus = (0.5 + h[coord] * (width as f64).sqrt() / (2.0 * c_eps)).clamp(0.0, 1.0);
    let value = if rng.gen::<f64>() < p_plus {
        scale
    } else {
        -scale
    };
    RandomizedReport { width, coord, value }
}

/// Shortcut for R(0, b): no vector needed for a non-participating report.
pub fn randomize_zero(width: usize, est_noise: f64, rng: &mut ChaCha8Rng) -> RandomizedReport {
    let coord = rng.gen_range(0..width);
    let scale = report_scale(est_noise, width);
    let sign = if rng.gen::<f64>() < 0.5 { 1.0 } else { -1.0 };
    RandomizedReport {
        width,
        coord,
        value: sign * scale,
    }
}

/// One user's state in the heavy-hitters protocol.
#[derive(Debug, Clone)]
pub struct HeavyUserState {
    pub id: usize,
    c_vote: f64,
    c_est: f64,
    /// Hash at the last global update; `None` until the first one.
    pub y_last: Option<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl HeavyUserState {
    pub fn new(id: usize, rng: ChaCha8Rng) -> Self {
        HeavyUserState {
            id,
            c_vote: 0.0,
            c_est: 0.0,
            y_last: None,
            rng,
        }
    }

    pub fn vote_spent(&self) -> f64 {
        self.c_vote
    }

    pub fn est_spent(&self) -> f64 {
        self.c_est
    }
}

/// Heavy-hitters estimate step: a participating user randomizes their real
/// hash, everyone else submits a fresh R(0, b) report — never silence.
pub fn heavy_estimate(
    user: &mut HeavyUserState,
    y_hat: &[f64],
    est_noise: f64,
    epsilon: f64,
    global_update: bool,
) -> (RandomizedReport, bool) {
    let send = global_update && budget_allows(user.c_est, est_noise, epsilon);
    if send {
        user.c_est += est_noise;
        (randomize_hash(y_hat, est_noise, &mut user.rng), true)
    } else {
        (
            randomize_zero(y_hat.len(), est_noise, &mut user.rng),
            false,
        )
    }
}

/// Coordinate-wise mean of the reports.
pub fn aggregate_reports(reports: &[RandomizedReport]) -> Vec<f64> {
    assert!(!reports.is_empty());
    let width = reports[0].width;
    let mut acc = vec![0.0f64; width];
    for r in reports {
        assert_eq!(r.width, width);
        acc[r.coord] += r.value;
    }
    let n = reports.len() as f64;
    for slot in acc.iter_mut() {
        *slot /= n;
    }
    acc
}

/// The published frequency oracle (Φ, ỹ).
#[derive(Debug, Clone, Copy)]
pub struct FrequencyOracle<'a> {
    pub projection: &'a ProjectionMatrix,
    pub y_tilde: &'a [f64],
}

impl<'a> FrequencyOracle<'a> {
    /// f̂(v) = ⟨Φ e_v, ỹ⟩.
    pub fn query(&self, v: usize) -> f64 {
        query_frequency(self, v)
    }
}

/// Inner product of column `v` with the aggregated reports.
pub fn query_frequency(oracle: &FrequencyOracle<'_>, v: usize) -> f64 {
    let proj = oracle.projection;
    assert!(v < proj.dict, "value {v} outside the dictionary");
    assert_eq!(oracle.y_tilde.len(), proj.width);
    match proj.dense_column(v) {
        Some(col) => col
            .iter()
            .zip(oracle.y_tilde)
            .map(|(&s, &y)| s as f64 * y)
            .sum::<f64>()
            * proj.inv_sqrt_w,
        None => oracle
            .y_tilde
            .iter()
            .enumerate()
            .map(|(j, &y)| proj.entry(j, v) * y)
            .sum(),
    }
}

/// Center-side state. The pre-update oracle vector is all zeros: queries
/// answer 0 everywhere until the first refresh.
#[derive(Debug, Clone)]
pub struct HeavyCenterState {
    pub epoch: usize,
    pub y_tilde: Vec<f64>,
    pub last_update: usize,
}

impl HeavyCenterState {
    pub fn new(width: usize) -> Self {
        HeavyCenterState {
            epoch: 0,
            y_tilde: vec![0.0; width],
            last_update: 0,
        }
    }
}

/// Everything published in one heavy-hitters epoch.
#[derive(Debug, Clone)]
pub struct HeavyEpochRecord {
    pub epoch: usize,
    pub votes: Vec<u8>,
    pub reports: Vec<RandomizedReport>,
    pub global_update: bool,
    /// Oracle vector published this epoch (carried forward on no update).
    pub y_tilde: Vec<f64>,
    pub vote_flags: Vec<bool>,
    pub est_flags: Vec<bool>,
}

/// Append-only log of a heavy-hitters run.
#[derive(Debug, Clone, Default)]
pub struct HeavyTranscript {
    epochs: Vec<HeavyEpochRecord>,
}

impl HeavyTranscript {
    pub fn new() -> Self {
        HeavyTranscript { epochs: Vec::new() }
    }

    pub fn push(&mut self, record: HeavyEpochRecord) {
        debug_assert_eq!(record.epoch, self.epochs.len() + 1);
        self.epochs.push(record);
    }

    pub fn epochs(&self) -> &[HeavyEpochRecord] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn users(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.votes.len())
    }
}

/// One heavy-hitters epoch: hash-space voting, update decision, R-based
/// estimation, oracle publication.
pub fn run_heavy_epoch(
    center: &mut HeavyCenterState,
    users: &mut [HeavyUserState],
    epoch_samples: &[Vec<usize>],
    proj: &ProjectionMatrix,
    params: &ProtocolParams,
    levels: &NoiseLevels,
    slack: SlackMode,
) -> HeavyEpochRecord {
    assert_eq!(epoch_samples.len(), users.len());
    assert_eq!(users.len(), params.users);
    let width = levels.hash_width.expect("heavy levels carry a hash width");
    assert_eq!(proj.width, width);
    let t = center.epoch + 1;
    assert!(t <= params.epochs, "run past the configured epoch count");
    let max_level = levels.max_level();
    let dict = proj.dict;

    let mut hashes: Vec<Vec<f64>> = vec![Vec::new(); users.len()];
    let mut votes = vec![0u8; users.len()];
    let mut vote_flags = vec![false; users.len()];
    users
        .par_iter_mut()
        .zip(epoch_samples.par_iter())
        .zip(hashes.par_iter_mut())
        .zip(votes.par_iter_mut().zip(vote_flags.par_iter_mut()))
        .for_each(|(((user, samples), hash), (vote_bit, flag))| {
            let hist = epoch_histogram(samples, dict, params.epoch_len);
            *hash = hash_histogram(proj, &hist);
            let b_star = heavy_confidence(hash, user.y_last.as_deref(), &levels.thresholds);
            let (bit, yes) = vote_core(
                &mut user.c_vote,
                &mut user.rng,
                t,
                b_star,
                levels.vote_noise,
                params.epsilon,
                max_level,
            );
            *vote_bit = bit;
            *flag = yes;
        });

    let global_update = decide_global_update(
        &votes,
        levels.vote_noise,
        params.users,
        params.epochs,
        params.delta,
        slack.heavy_constant(),
    );

    let mut reports = vec![
        RandomizedReport {
            width,
            coord: 0,
            value: 0.0
        };
        users.len()
    ];
    let mut est_flags = vec![false; users.len()];
    users
        .par_iter_mut()
        .zip(hashes.par_iter_mut())
        .zip(reports.par_iter_mut().zip(est_flags.par_iter_mut()))
        .for_each(|((user, hash), (report, flag))| {
            let (r, sent) = heavy_estimate(
                user,
                hash,
                levels.est_noise,
                params.epsilon,
                global_update,
            );
            *report = r;
            *flag = sent;
            if global_update {
                user.y_last = Some(std::mem::take(hash));
            }
        });

    if global_update {
        center.y_tilde = aggregate_reports(&reports);
        center.last_update = t;
    }
    center.epoch = t;

    HeavyEpochRecord {
        epoch: t,
        votes,
        reports,
        global_update,
        y_tilde: center.y_tilde.clone(),
        vote_flags,
        est_flags,
    }
}

/// Per-(user, epoch) dictionary samples for a heavy-hitters run.
pub trait EpochSamples: Sync {
    /// Samples for `user` in 1-based `epoch`; values in [0, d), length ℓ.
    fn epoch_samples(&self, user: usize, epoch: usize) -> Vec<usize>;
}

impl<F> EpochSamples for F
where
    F: Fn(usize, usize) -> Vec<usize> + Sync,
{
    fn epoch_samples(&self, user: usize, epoch: usize) -> Vec<usize> {
        self(user, epoch)
    }
}

/// Drive a full heavy-hitters run. The projection seed derives from the
/// master seed; the dense sign cache is built when it fits comfortably.
pub fn run_heavy_protocol<D: EpochSamples>(
    params: &ProtocolParams,
    levels: &NoiseLevels,
    slack: SlackMode,
    data: &D,
    master_seed: u64,
) -> (
    HeavyTranscript,
    Vec<HeavyUserState>,
    HeavyCenterState,
    ProjectionMatrix,
) {
    let width = levels.hash_width.expect("heavy levels carry a hash width");
    let dict = params
        .dict_size
        .expect("heavy protocol requires a dictionary size");
    let mut proj = gen_proj(
        width,
        dict,
        rng::derive_seed(master_seed, StreamDomain::Projection, 0),
    );
    if width.saturating_mul(dict) <= 200_000_000 {
        proj.materialize();
    }
    let mut users: Vec<HeavyUserState> = (0..params.users)
        .map(|i| {
            HeavyUserState::new(i, rng::stream(master_seed, StreamDomain::UserProtocol, i as u64))
        })
        .collect();
    let mut center = HeavyCenterState::new(width);
    let mut transcript = HeavyTranscript::new();
    for t in 1..=params.epochs {
        let epoch_samples: Vec<Vec<usize>> = (0..params.users)
            .into_par_iter()
            .map(|i| data.epoch_samples(i, t))
            .collect();
        let record = run_heavy_epoch(
            &mut center,
            &mut users,
            &epoch_samples,
            &proj,
            params,
            levels,
            slack,
        );
        transcript.push(record);
    }
    (transcript, users, center, proj)
}
