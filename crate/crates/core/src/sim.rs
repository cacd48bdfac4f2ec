//! Synthetic data under the subgroup model, exact ground truth, and
//! scoring of protocol output against the theoretical bounds.
//!
//! Users are partitioned into subgroups; each subgroup carries an evolving
//! parameter (a Bernoulli mean, or a distribution over the dictionary) that
//! a change schedule rewrites at epoch boundaries. Mid-epoch change rounds
//! exist behind an explicit flag for stress testing only — every guarantee
//! is stated per epoch.

use rand_distr::weighted_alias::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::bernoulli::{EpochData, Transcript};
use crate::error::Error;
use crate::heavy::{EpochSamples, FrequencyOracle, HeavyTranscript, ProjectionMatrix};
use crate::params::{
    accuracy_bound_bernoulli, accuracy_bound_heavy, ChangeBudget, NoiseLevels, ProtocolParams,
};
use crate::rng::{self, StreamDomain};

/// Partition of the user population into subgroups.
#[derive(Debug, Clone)]
pub struct SubgroupModel {
    sizes: Vec<usize>,
    assignment: Vec<u32>,
}

impl SubgroupModel {
    /// Contiguous blocks of the given sizes. Sizes must sum to the user
    /// count and every subgroup must reach the configured minimum.
    pub fn from_sizes(sizes: Vec<usize>, users: usize, min_group: usize) -> Result<Self, Error> {
        if sizes.is_empty() {
            return Err(Error::Schedule {
                detail: "at least one subgroup required".into(),
            });
        }
        let total: usize = sizes.iter().sum();
        if total != users {
            return Err(Error::Schedule {
                detail: format!("subgroup sizes sum to {total}, expected n = {users}"),
            });
        }
        if let Some(&small) = sizes.iter().min() {
            if small < min_group {
                return Err(Error::Schedule {
                    detail: format!("smallest subgroup has {small} users, below L = {min_group}"),
                });
            }
        }
        let mut assignment = Vec::with_capacity(users);
        for (g, &size) in sizes.iter().enumerate() {
            assignment.extend(std::iter::repeat(g as u32).take(size));
        }
        Ok(SubgroupModel { sizes, assignment })
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn users(&self) -> usize {
        self.assignment.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_of(&self, user: usize) -> usize {
        self.assignment[user] as usize
    }
}

/// A subgroup parameter the schedule can rewrite.
pub trait ScheduleParam: Clone + PartialEq + Send + Sync {
    fn check(&self, dict: Option<usize>) -> Result<(), Error>;
}

impl ScheduleParam for f64 {
    fn check(&self, _dict: Option<usize>) -> Result<(), Error> {
        if !(0.0..=1.0).contains(self) {
            return Err(Error::Schedule {
                detail: format!("Bernoulli mean {self} outside [0, 1]"),
            });
        }
        Ok(())
    }
}

impl ScheduleParam for Vec<f64> {
    fn check(&self, dict: Option<usize>) -> Result<(), Error> {
        if let Some(d) = dict {
            if self.len() != d {
                return Err(Error::Schedule {
                    detail: format!("distribution has {} entries, expected d = {d}", self.len()),
                });
            }
        }
        if self.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Schedule {
                detail: "distribution entries must lie in [0, 1]".into(),
            });
        }
        let total: f64 = self.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Schedule {
                detail: format!("distribution sums to {total}, expected 1"),
            });
        }
        Ok(())
    }
}

/// One rewrite of a subgroup parameter. `round = 0` means the epoch
/// boundary; nonzero rounds require the mid-epoch flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent<P> {
    pub epoch: usize,
    pub round: usize,
    pub group: usize,
    pub value: P,
}

/// Initial parameters plus the ordered list of changes.
#[derive(Debug, Clone)]
pub struct Schedule<P> {
    initial: Vec<P>,
    changes: Vec<ChangeEvent<P>>,
    epochs: usize,
    epoch_len: usize,
}

impl<P: ScheduleParam> Schedule<P> {
    pub fn new(
        initial: Vec<P>,
        mut changes: Vec<ChangeEvent<P>>,
        epochs: usize,
        epoch_len: usize,
        allow_mid_epoch: bool,
        dict: Option<usize>,
    ) -> Result<Self, Error> {
        if initial.is_empty() {
            return Err(Error::Schedule {
                detail: "initial parameters required for every subgroup".into(),
            });
        }
        for p in &initial {
            p.check(dict)?;
        }
        changes.sort_by_key(|c| (c.group, c.epoch, c.round));
        for c in &changes {
            c.value.check(dict)?;
            if c.group >= initial.len() {
                return Err(Error::Schedule {
                    detail: format!("change names subgroup {} of {}", c.group + 1, initial.len()),
                });
            }
            if c.epoch < 1 || c.epoch > epochs {
                return Err(Error::Schedule {
                    detail: format!("change epoch {} outside [1, {epochs}]", c.epoch),
                });
            }
            if c.round >= epoch_len {
                return Err(Error::Schedule {
                    detail: format!("change round {} outside [0, {epoch_len})", c.round),
                });
            }
            if c.round != 0 && !allow_mid_epoch {
                return Err(Error::Schedule {
                    detail: "mid-epoch change rounds are disabled".into(),
                });
            }
            if c.epoch == 1 && c.round == 0 {
                return Err(Error::Schedule {
                    detail: "a change at the first epoch boundary would shadow the initial value"
                        .into(),
                });
            }
        }
        for pair in changes.windows(2) {
            if pair[0].group == pair[1].group
                && (pair[0].epoch, pair[0].round) == (pair[1].epoch, pair[1].round)
            {
                return Err(Error::Schedule {
                    detail: format!(
                        "two changes for subgroup {} at epoch {} round {}",
                        pair[0].group + 1,
                        pair[0].epoch,
                        pair[0].round
                    ),
                });
            }
        }
        Ok(Schedule {
            initial,
            changes,
            epochs,
            epoch_len,
        })
    }

    pub fn groups(&self) -> usize {
        self.initial.len()
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn epoch_len(&self) -> usize {
        self.epoch_len
    }

    pub fn changes(&self) -> &[ChangeEvent<P>] {
        &self.changes
    }

    pub fn initial(&self) -> &[P] {
        &self.initial
    }

    /// Parameter of `group` at (1-based `epoch`, 0-based `round`).
    pub fn param_at(&self, group: usize, epoch: usize, round: usize) -> &P {
        let mut current = &self.initial[group];
        for c in self.changes.iter().filter(|c| c.group == group) {
            if (c.epoch, c.round) <= (epoch, round) {
                current = &c.value;
            } else {
                break;
            }
        }
        current
    }

    /// Constant-parameter segments of one (group, epoch):
    /// (start_round, value) pairs covering [0, ℓ).
    fn segments(&self, group: usize, epoch: usize) -> Vec<(usize, &P)> {
        let mut segs = vec![(0usize, self.param_at(group, epoch, 0))];
        for c in self.changes.iter().filter(|c| c.group == group) {
            if c.epoch == epoch && c.round > 0 {
                segs.push((c.round, &c.value));
            }
        }
        segs
    }

    /// Change indicator per epoch: an epoch is flagged when any subgroup's
    /// parameter differs anywhere in it from the value it held at the end
    /// of the previous epoch. Rewrites to the current value do not count.
    pub fn change_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.epochs];
        for g in 0..self.groups() {
            let mut current = self.initial[g].clone();
            for c in self.changes.iter().filter(|c| c.group == g) {
                if c.value != current {
                    flags[c.epoch - 1] = true;
                    current = c.value.clone();
                }
            }
        }
        flags
    }

    /// Number of change epochs among 1..=t.
    pub fn count_changes_up_to(&self, t: usize) -> usize {
        assert!(t >= 1 && t <= self.epochs);
        self.change_flags()[..t].iter().filter(|&&f| f).count()
    }
}

/// Exact per-epoch population means for the Bernoulli model.
#[derive(Debug, Clone)]
pub struct BernoulliTruth {
    /// p^t, the round-averaged population mean of epoch t (index t−1).
    pub per_epoch: Vec<f64>,
    pub change_flags: Vec<bool>,
}

/// Exact per-epoch population mixture for the dictionary model.
#[derive(Debug, Clone)]
pub struct DictTruth {
    /// 𝒫^t as a dense distribution over [0, d) (index t−1).
    pub per_epoch: Vec<Vec<f64>>,
    pub change_flags: Vec<bool>,
}

fn group_weights(model: &SubgroupModel) -> Vec<f64> {
    let n = model.users() as f64;
    model.sizes().iter().map(|&s| s as f64 / n).collect()
}

fn bernoulli_truth(model: &SubgroupModel, schedule: &Schedule<f64>) -> BernoulliTruth {
    let weights = group_weights(model);
    let ell = schedule.epoch_len;
    let per_epoch = (1..=schedule.epochs)
        .map(|t| {
            let mut acc = 0.0f64;
            for (g, &w) in weights.iter().enumerate() {
                let segs = schedule.segments(g, t);
                let mut group_sum = 0.0f64;
                for (i, &(start, value)) in segs.iter().enumerate() {
                    let end = segs.get(i + 1).map_or(ell, |&(s, _)| s);
                    group_sum += (end - start) as f64 * value;
                }
                acc += w * group_sum / ell as f64;
            }
            acc
        })
        .collect();
    BernoulliTruth {
        per_epoch,
        change_flags: schedule.change_flags(),
    }
}

fn dict_truth(model: &SubgroupModel, schedule: &Schedule<Vec<f64>>, dict: usize) -> DictTruth {
    let weights = group_weights(model);
    let ell = schedule.epoch_len;
    let per_epoch = (1..=schedule.epochs)
        .map(|t| {
            let mut acc = vec![0.0f64; dict];
            for (g, &w) in weights.iter().enumerate() {
                let segs = schedule.segments(g, t);
                for (i, &(start, value)) in segs.iter().enumerate() {
                    let end = segs.get(i + 1).map_or(ell, |&(s, _)| s);
                    let frac = (end - start) as f64 / ell as f64;
                    for (slot, &p) in acc.iter_mut().zip(value) {
                        *slot += w * frac * p;
                    }
                }
            }
            acc
        })
        .collect();
    DictTruth {
        per_epoch,
        change_flags: schedule.change_flags(),
    }
}

/// Lazily regenerable Bernoulli data: the bits of any (user, epoch) cell are
/// a pure function of (master seed, model, schedule).
#[derive(Debug, Clone)]
pub struct BernoulliData {
    model: SubgroupModel,
    schedule: Schedule<f64>,
    master: u64,
}

impl BernoulliData {
    pub fn model(&self) -> &SubgroupModel {
        &self.model
    }

    pub fn schedule(&self) -> &Schedule<f64> {
        &self.schedule
    }
}

impl EpochData for BernoulliData {
    fn epoch_bits(&self, user: usize, epoch: usize) -> Vec<u8> {
        let ell = self.schedule.epoch_len;
        let group = self.model.group_of(user);
        let mut rng = rng::stream(
            self.master,
            StreamDomain::UserData,
            rng::user_epoch_index(user, epoch),
        );
        let mut bits = vec![0u8; ell];
        let segs = self.schedule.segments(group, epoch);
        for (i, &(start, &mu)) in segs.iter().enumerate() {
            let end = segs.get(i + 1).map_or(ell, |&(s, _)| s);
            rng::fill_bernoulli_bits(&mut rng, mu, &mut bits[start..end]);
        }
        bits
    }
}

/// Build the Bernoulli data stream and its exact ground truth.
pub fn gen_bernoulli_stream(
    model: SubgroupModel,
    schedule: Schedule<f64>,
    master: u64,
) -> Result<(BernoulliData, BernoulliTruth), Error> {
    if model.groups() != schedule.groups() {
        return Err(Error::Schedule {
            detail: format!(
                "model has {} subgroups, schedule has {}",
                model.groups(),
                schedule.groups()
            ),
        });
    }
    let truth = bernoulli_truth(&model, &schedule);
    Ok((
        BernoulliData {
            model,
            schedule,
            master,
        },
        truth,
    ))
}

/// Lazily regenerable dictionary data. Alias tables are prebuilt per
/// (group, segment) so drawing a sample is O(1).
pub struct DictData {
    model: SubgroupModel,
    schedule: Schedule<Vec<f64>>,
    dict: usize,
    master: u64,
    // (start_round, table) per segment, indexed [group][epoch - 1].
    tables: Vec<Vec<Vec<(usize, WeightedAliasIndex<f64>)>>>,
}

impl DictData {
    pub fn model(&self) -> &SubgroupModel {
        &self.model
    }

    pub fn schedule(&self) -> &Schedule<Vec<f64>> {
        &self.schedule
    }

    pub fn dict(&self) -> usize {
        self.dict
    }
}

impl EpochSamples for DictData {
    fn epoch_samples(&self, user: usize, epoch: usize) -> Vec<usize> {
        let ell = self.schedule.epoch_len;
        let group = self.model.group_of(user);
        let mut rng = rng::stream(
            self.master,
            StreamDomain::UserData,
            rng::user_epoch_index(user, epoch),
        );
        let segs = &self.tables[group][epoch - 1];
        let mut samples = Vec::with_capacity(ell);
        for (i, (start, table)) in segs.iter().enumerate() {
            let end = segs.get(i + 1).map_or(ell, |(s, _)| *s);
            samples.extend((*start..end).map(|_| table.sample(&mut rng)));
        }
        samples
    }
}

/// Build the dictionary data stream and its exact ground truth.
pub fn gen_dictionary_stream(
    model: SubgroupModel,
    schedule: Schedule<Vec<f64>>,
    dict: usize,
    master: u64,
) -> Result<(DictData, DictTruth), Error> {
    if model.groups() != schedule.groups() {
        return Err(Error::Schedule {
            detail: format!(
                "model has {} subgroups, schedule has {}",
                model.groups(),
                schedule.groups()
            ),
        });
    }
    let mut tables = Vec::with_capacity(model.groups());
    for g in 0..model.groups() {
        let mut per_epoch = Vec::with_capacity(schedule.epochs);
        for t in 1..=schedule.epochs {
            let mut segs = Vec::new();
            for (start, dist) in schedule.segments(g, t) {
                let table =
                    WeightedAliasIndex::new(dist.clone()).map_err(|e| Error::Schedule {
                        detail: format!("unusable distribution for subgroup {}: {e}", g + 1),
                    })?;
                segs.push((start, table));
            }
            per_epoch.push(segs);
        }
        tables.push(per_epoch);
    }
    let truth = dict_truth(&model, &schedule, dict);
    Ok((
        DictData {
            model,
            schedule,
            dict,
            master,
            tables,
        },
        truth,
    ))
}

/// One scored epoch of a run.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    pub epoch: usize,
    pub global_update: bool,
    /// Ground truth: p^t, or 𝒫^t at its heaviest value.
    pub true_value: f64,
    /// Published estimate, unclamped.
    pub est_raw: f64,
    pub est_clamped: f64,
    /// |p̃ − p^t|, or max over the dictionary of |f̂ − 𝒫^t|.
    pub error: f64,
    /// The closed-form accuracy bound; reported even when vacuous (> 1).
    pub bound: f64,
    pub within_bound: bool,
    pub changes_so_far: usize,
    /// Whether the cumulative change count is still below the budget.
    pub budget_active: bool,
    pub votes_cast: usize,
    pub estimates_sent: usize,
}

fn cumulative_changes(flags: &[bool]) -> Vec<usize> {
    let mut acc = 0usize;
    flags
        .iter()
        .map(|&f| {
            acc += f as usize;
            acc
        })
        .collect()
}

/// Score a Bernoulli transcript against its ground truth.
pub fn evaluate_run(
    transcript: &Transcript,
    truth: &BernoulliTruth,
    params: &ProtocolParams,
    budget: &ChangeBudget,
) -> Vec<EpochReport> {
    assert_eq!(transcript.len(), truth.per_epoch.len());
    let bound = accuracy_bound_bernoulli(params);
    let changes = cumulative_changes(&truth.change_flags);
    transcript
        .epochs()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let true_value = truth.per_epoch[i];
            let error = (rec.p_tilde - true_value).abs();
            EpochReport {
                epoch: rec.epoch,
                global_update: rec.global_update,
                true_value,
                est_raw: rec.p_tilde,
                est_clamped: rec.p_tilde.clamp(0.0, 1.0),
                error,
                bound,
                within_bound: error <= bound,
                changes_so_far: changes[i],
                budget_active: (changes[i] as f64) < budget.max_changes,
                votes_cast: rec.vote_flags.iter().filter(|&&f| f).count(),
                estimates_sent: rec.est_flags.iter().filter(|&&f| f).count(),
            }
        })
        .collect()
}

/// Score a heavy-hitters transcript: the error of an epoch is the worst
/// frequency-oracle error over the whole dictionary.
pub fn evaluate_heavy_run(
    transcript: &HeavyTranscript,
    proj: &ProjectionMatrix,
    truth: &DictTruth,
    params: &ProtocolParams,
    levels: &NoiseLevels,
    budget: &ChangeBudget,
) -> Vec<EpochReport> {
    assert_eq!(transcript.len(), truth.per_epoch.len());
    let width = levels.hash_width.expect("heavy levels carry a hash width");
    let bound = accuracy_bound_heavy(params, width);
    let changes = cumulative_changes(&truth.change_flags);
    transcript
        .epochs()
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let dist = &truth.per_epoch[i];
            let oracle = FrequencyOracle {
                projection: proj,
                y_tilde: &rec.y_tilde,
            };
            let mut error = 0.0f64;
            let mut top = 0usize;
            for (v, &p) in dist.iter().enumerate() {
                error = error.max((oracle.query(v) - p).abs());
                if p > dist[top] {
                    top = v;
                }
            }
            let est_raw = oracle.query(top);
            EpochReport {
                epoch: rec.epoch,
                global_update: rec.global_update,
                true_value: dist[top],
                est_raw,
                est_clamped: est_raw.clamp(0.0, 1.0),
                error,
                bound,
                within_bound: error <= bound,
                changes_so_far: changes[i],
                budget_active: (changes[i] as f64) < budget.max_changes,
                votes_cast: rec.vote_flags.iter().filter(|&&f| f).count(),
                estimates_sent: rec.est_flags.iter().filter(|&&f| f).count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::EpochRecord;

    fn boundary_schedule(
        initial: Vec<f64>,
        changes: Vec<(usize, usize, f64)>,
        epochs: usize,
        ell: usize,
    ) -> Schedule<f64> {
        Schedule::new(
            initial,
            changes
                .into_iter()
                .map(|(epoch, group, value)| ChangeEvent {
                    epoch,
                    round: 0,
                    group,
                    value,
                })
                .collect(),
            epochs,
            ell,
            false,
            None,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_all_ones_stream() {
        let model = SubgroupModel::from_sizes(vec![10], 10, 1).unwrap();
        let schedule = boundary_schedule(vec![1.0], vec![], 3, 20);
        let (data, truth) = gen_bernoulli_stream(model, schedule, 1).unwrap();
        for t in 1..=3 {
            assert_eq!(truth.per_epoch[t - 1], 1.0);
            for u in 0..10 {
                assert!(data.epoch_bits(u, t).iter().all(|&b| b == 1));
            }
        }
    }

    #[test]
    fn stream_means_concentrate() {
        let model = SubgroupModel::from_sizes(vec![1000], 1000, 1).unwrap();
        let schedule = boundary_schedule(vec![0.5], vec![], 1, 1000);
        let (data, _) = gen_bernoulli_stream(model, schedule, 5).unwrap();
        let mut total = 0u64;
        for u in 0..1000 {
            total += data.epoch_bits(u, 1).iter().map(|&b| b as u64).sum::<u64>();
        }
        let mean = total as f64 / 1_000_000.0;
        assert!((mean - 0.5).abs() < 3.0 * (0.25f64 / 1_000_000.0).sqrt());
    }

    #[test]
    fn weighted_ground_truth() {
        let model = SubgroupModel::from_sizes(vec![600, 400], 1000, 400).unwrap();
        let schedule = boundary_schedule(vec![0.2, 0.7], vec![], 2, 10);
        let (_, truth) = gen_bernoulli_stream(model, schedule, 1).unwrap();
        assert!((truth.per_epoch[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn truth_matches_independent_recompute_exactly() {
        let model = SubgroupModel::from_sizes(vec![600, 400], 1000, 400).unwrap();
        let schedule = boundary_schedule(vec![0.25, 0.5], vec![(3, 1, 0.9)], 4, 10);
        let (data, truth) = gen_bernoulli_stream(model, schedule, 1).unwrap();
        for t in 1..=4 {
            let expect = 0.6 * *data.schedule().param_at(0, t, 0)
                + 0.4 * *data.schedule().param_at(1, t, 0);
            assert_eq!(truth.per_epoch[t - 1].to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let mk = || {
            let model = SubgroupModel::from_sizes(vec![5, 5], 10, 5).unwrap();
            let schedule = boundary_schedule(vec![0.3, 0.8], vec![(2, 0, 0.6)], 3, 50);
            gen_bernoulli_stream(model, schedule, 77).unwrap().0
        };
        let d1 = mk();
        let d2 = mk();
        for u in 0..10 {
            for t in 1..=3 {
                assert_eq!(d1.epoch_bits(u, t), d2.epoch_bits(u, t));
            }
        }
    }

    #[test]
    fn change_counting_examples() {
        let none = boundary_schedule(vec![0.5, 0.5], vec![], 8, 10);
        assert_eq!(none.count_changes_up_to(8), 0);

        let both_at_five =
            boundary_schedule(vec![0.5, 0.5], vec![(5, 0, 0.1), (5, 1, 0.9)], 8, 10);
        assert_eq!(both_at_five.count_changes_up_to(8), 1);

        let two = boundary_schedule(vec![0.5, 0.5], vec![(3, 0, 0.1), (7, 0, 0.9)], 8, 10);
        assert_eq!(two.count_changes_up_to(5), 1);
        assert_eq!(two.count_changes_up_to(8), 2);
    }

    #[test]
    fn noop_changes_do_not_count() {
        let s = boundary_schedule(vec![0.5], vec![(4, 0, 0.5)], 8, 10);
        assert_eq!(s.count_changes_up_to(8), 0);
        let back_and_forth =
            boundary_schedule(vec![0.5], vec![(3, 0, 0.6), (5, 0, 0.5)], 8, 10);
        assert_eq!(back_and_forth.count_changes_up_to(8), 2);
    }

    #[test]
    fn schedule_validation_errors() {
        assert!(Schedule::<f64>::new(vec![1.5], vec![], 4, 10, false, None).is_err());
        let mid = ChangeEvent {
            epoch: 2,
            round: 3,
            group: 0,
            value: 0.5,
        };
        assert!(Schedule::new(vec![0.5], vec![mid.clone()], 4, 10, false, None).is_err());
        assert!(Schedule::new(vec![0.5], vec![mid], 4, 10, true, None).is_ok());
    }

    #[test]
    fn mid_epoch_rounds_average_into_truth() {
        // One subgroup, epoch 2 switches 0.0 -> 1.0 at round 5 of 10.
        let schedule = Schedule::new(
            vec![0.0],
            vec![ChangeEvent {
                epoch: 2,
                round: 5,
                group: 0,
                value: 1.0,
            }],
            3,
            10,
            true,
            None,
        )
        .unwrap();
        let model = SubgroupModel::from_sizes(vec![4], 4, 1).unwrap();
        let (_, truth) = gen_bernoulli_stream(model, schedule, 1).unwrap();
        assert_eq!(truth.per_epoch[0], 0.0);
        assert!((truth.per_epoch[1] - 0.5).abs() < 1e-15);
        assert_eq!(truth.per_epoch[2], 1.0);
        assert_eq!(truth.change_flags, vec![false, true, false]);
    }

    #[test]
    fn dictionary_point_mass_and_uniform() {
        let model = SubgroupModel::from_sizes(vec![20], 20, 1).unwrap();
        let point = Schedule::new(
            vec![vec![0.0, 0.0, 1.0, 0.0]],
            vec![],
            2,
            50,
            false,
            Some(4),
        )
        .unwrap();
        let (data, truth) = gen_dictionary_stream(model.clone(), point, 4, 9).unwrap();
        assert!(data.epoch_samples(3, 1).iter().all(|&v| v == 2));
        assert_eq!(truth.per_epoch[0], vec![0.0, 0.0, 1.0, 0.0]);

        let uniform = Schedule::new(vec![vec![0.25; 4]], vec![], 1, 2000, false, Some(4)).unwrap();
        let (data, _) = gen_dictionary_stream(model, uniform, 4, 10).unwrap();
        let mut counts = [0u32; 4];
        for u in 0..20 {
            for v in data.epoch_samples(u, 1) {
                counts[v] += 1;
            }
        }
        let total = 20.0 * 2000.0;
        for c in counts {
            let frac = c as f64 / total;
            assert!((frac - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / total).sqrt());
        }
    }

    #[test]
    fn dictionary_mixture_truth() {
        let model = SubgroupModel::from_sizes(vec![3, 1], 4, 1).unwrap();
        let schedule = Schedule::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![],
            1,
            10,
            false,
            Some(2),
        )
        .unwrap();
        let (_, truth) = gen_dictionary_stream(model, schedule, 2, 1).unwrap();
        assert!((truth.per_epoch[0][0] - 0.75).abs() < 1e-15);
        assert!((truth.per_epoch[0][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn evaluate_flags_and_bound() {
        let params = ProtocolParams::new(1000, 2, 500, 100, 16, 1.0, 0.1).unwrap();
        let budget = ChangeBudget {
            max_changes: 1.5,
            theorem_floor: 0.0,
        };
        // Two synthetic epochs: a perfect estimate, then a stale one, with a
        // change arriving at epoch 2.
        let mut transcript = Transcript::new();
        for (epoch, p_tilde) in [(1usize, 0.4f64), (2, 0.4)] {
            transcript.push(EpochRecord {
                epoch,
                votes: vec![0; 1000],
                estimates: vec![0; 1000],
                global_update: epoch == 1,
                p_tilde,
                vote_flags: vec![false; 1000],
                est_flags: vec![false; 1000],
            });
        }
        let truth = BernoulliTruth {
            per_epoch: vec![0.4, 0.9],
            change_flags: vec![false, true],
        };
        let reports = evaluate_run(&transcript, &truth, &params, &budget);
        assert_eq!(reports[0].error, 0.0);
        assert!(reports[0].within_bound);
        assert!(reports[0].budget_active);
        // Frozen bound for these parameters.
        assert!((reports[0].bound - 6.4550264866018495).abs() < 1e-10);
        assert_eq!(reports[1].changes_so_far, 1);
        assert!(reports[1].budget_active); // 1 < 1.5
        assert!((reports[1].error - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_flag_flips_at_the_crossing_epoch() {
        let s = boundary_schedule(vec![0.5], vec![(2, 0, 0.6), (4, 0, 0.7)], 5, 10);
        let flags = s.change_flags();
        let cum = cumulative_changes(&flags);
        let budget = 2.0f64;
        let active: Vec<bool> = cum.iter().map(|&c| (c as f64) < budget).collect();
        assert_eq!(active, vec![true, true, true, false, false]);
    }
}
