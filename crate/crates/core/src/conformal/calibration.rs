use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::example::{common_dim, Example};
use crate::nonconformity::{Scorer, ScorerKind};

/// Sorted calibration nonconformity scores, bound to the scorer that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    scores: Vec<f64>,
    kind: ScorerKind,
    fingerprint: [u8; 8],
}

impl CalibrationSet {
    /// Sorts `scores` ascending.
    pub fn new(mut scores: Vec<f64>, kind: ScorerKind, fingerprint: [u8; 8]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("calibration score {i}")));
        }
        scores.sort_unstable_by(f64::total_cmp);
        Ok(Self {
            scores,
            kind,
            fingerprint,
        })
    }

    /// Accepts already-sorted scores, rejecting any descent.
    pub fn from_sorted(scores: Vec<f64>, kind: ScorerKind, fingerprint: [u8; 8]) -> Result<Self> {
        if let Some(i) = scores.windows(2).position(|w| !(w[0] <= w[1])) {
            return Err(Error::UnsortedCalibration(i + 1));
        }
        Self::new(scores, kind, fingerprint)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn fingerprint(&self) -> [u8; 8] {
        self.fingerprint
    }

    /// Smallest p-value this set can produce, `1 / (|cal| + 1)`.
    pub fn p_floor(&self) -> f64 {
        1.0 / (self.scores.len() as f64 + 1.0)
    }

    /// Fraction of calibration scores `>= score`, floored at [`Self::p_floor`].
    pub fn p_value(&self, score: f64) -> Result<f64> {
        p_value(score, self)
    }

    /// Errors unless this set was produced by `scorer`.
    pub fn check_scorer(&self, scorer: &Scorer) -> Result<()> {
        self.check_binding(scorer.kind(), scorer.fingerprint())
    }

    pub fn check_binding(&self, kind: ScorerKind, fingerprint: [u8; 8]) -> Result<()> {
        if kind != self.kind || fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                calibration: format!("{}:{}", self.kind.name(), hex(&self.fingerprint)),
                scorer: format!("{}:{}", kind.name(), hex(&fingerprint)),
            });
        }
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Conformal p-value `|{i : a_i >= score}| / |cal|`, floored at `1/(|cal|+1)`
/// so that its logarithm is always finite. Binary search, `O(log |cal|)`.
pub fn p_value(score: f64, cal: &CalibrationSet) -> Result<f64> {
    if cal.scores.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    if !score.is_finite() {
        return Err(Error::NonFinite(format!("test score {score}")));
    }
    let n = cal.scores.len();
    let below = cal.scores.partition_point(|&a| a < score);
    let raw = (n - below) as f64 / n as f64;
    Ok(raw.max(cal.p_floor()))
}

/// How VAE calibration examples are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VaeCalibration {
    /// One score per example from the noise-free mean reconstruction.
    #[default]
    MeanReconstruction,
    /// `samples` scores per example from sampled reconstructions.
    Sampled { samples: usize, seed: u64 },
}

/// Scores every calibration example with `scorer` and sorts the result.
pub fn calibrate_with(scorer: &Scorer, calibration: &[Example], vae: VaeCalibration) -> Result<CalibrationSet> {
    let dim = common_dim(calibration)?;
    check_dim("calibration data vs scorer", scorer.input_dim(), dim)?;
    let scores = match (scorer, vae) {
        (Scorer::Vae(_), VaeCalibration::Sampled { samples, seed }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut all = Vec::with_capacity(samples * calibration.len());
            for z in calibration {
                all.extend(scorer.score_many(z, samples, &mut rng)?);
            }
            all
        }
        _ => calibration
            .iter()
            .map(|z| scorer.score(z))
            .collect::<Result<Vec<_>>>()?,
    };
    CalibrationSet::new(scores, scorer.kind(), scorer.fingerprint())
}

/// Offline calibration: the first `m` examples form the proper training set
/// handed to `fit`, the remaining `l - m` are scored against the fitted scorer.
pub fn calibrate<F>(train: &[Example], m: usize, fit: F, vae: VaeCalibration) -> Result<(Scorer, CalibrationSet)>
where
    F: FnOnce(&[Example]) -> Result<Scorer>,
{
    let l = train.len();
    if m == 0 || m >= l {
        return Err(Error::InvalidArgument(format!(
            "proper training size must satisfy 0 < m < {l}, got {m}"
        )));
    }
    let (proper, cal) = train.split_at(m);
    let scorer = fit(proper)?;
    let set = calibrate_with(&scorer, cal, vae)?;
    Ok((scorer, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal(scores: &[f64]) -> CalibrationSet {
        CalibrationSet::new(scores.to_vec(), ScorerKind::Knn, [0; 8]).unwrap()
    }

    #[test]
    fn p_value_hand_examples() {
        let c = cal(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.p_value(2.5).unwrap(), 0.5);
        assert_eq!(c.p_value(0.5).unwrap(), 1.0);
        assert_eq!(c.p_value(5.0).unwrap(), 0.2);
        assert_eq!(c.p_value(2.0).unwrap(), 0.75);
    }

    #[test]
    fn ties_count_as_at_least() {
        let c = cal(&[1.0, 1.0, 1.0, 2.0]);
        assert_eq!(c.p_value(1.0).unwrap(), 1.0);
    }

    #[test]
    fn non_finite_score_rejected() {
        let c = cal(&[1.0]);
        assert!(c.p_value(f64::NAN).is_err());
    }

    #[test]
    fn empty_calibration_rejected() {
        assert!(matches!(
            CalibrationSet::new(vec![], ScorerKind::Knn, [0; 8]),
            Err(Error::EmptyCalibration)
        ));
    }

    #[test]
    fn from_sorted_rejects_descent() {
        assert!(matches!(
            CalibrationSet::from_sorted(vec![2.0, 1.0], ScorerKind::Knn, [0; 8]),
            Err(Error::UnsortedCalibration(1))
        ));
    }

    #[test]
    fn split_sizes() {
        let data: Vec<Example> = (0..10).map(|i| Example::new(vec![i as f64]).unwrap()).collect();
        let (_, set) = calibrate(&data, 8, |p| Scorer::knn(p.to_vec(), 1), VaeCalibration::default()).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.scores().windows(2).all(|w| w[0] <= w[1]));
        for m in [0, 10, 11] {
            assert!(calibrate(&data, m, |p| Scorer::knn(p.to_vec(), 1), VaeCalibration::default()).is_err());
        }
    }

    #[test]
    fn collinear_knn_scores() {
        // proper set {0,1,2,3}; calibration {5, 4.5}; k = 2
        let pts = [0.0, 1.0, 2.0, 3.0, 5.0, 4.5];
        let data: Vec<Example> = pts.iter().map(|&x| Example::new(vec![x, 0.0]).unwrap()).collect();
        let (_, set) = calibrate(&data, 4, |p| Scorer::knn(p.to_vec(), 2), VaeCalibration::default()).unwrap();
        // 4.5 -> (1.5 + 2.5)/2 = 2.0 ; 5 -> (2 + 3)/2 = 2.5
        assert_eq!(set.scores(), &[2.0, 2.5]);
    }

    #[test]
    fn dimension_mismatch() {
        let train: Vec<Example> = (0..3).map(|i| Example::new(vec![i as f64, 0.0]).unwrap()).collect();
        let scorer = Scorer::knn(train, 1).unwrap();
        let cal = vec![Example::new(vec![1.0]).unwrap()];
        assert!(matches!(
            calibrate_with(&scorer, &cal, VaeCalibration::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
