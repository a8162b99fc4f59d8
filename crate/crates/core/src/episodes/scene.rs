use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::example::Example;

/// Corruption level above which a frame is out of distribution.
pub const IN_DISTRIBUTION_MAX_R: f64 = 20.0;

/// Synthetic camera frames: a soft disk on a flat background, plus rain
/// streaks whose amount grows with the corruption level `r`.
///
/// A streak is a vertical run of `streak_length` pixels that brightens each
/// of them by the same amount. Streaks sit in disjoint grid slots, filled in
/// a fixed order (see [`Self::streak_order`]): a frame at level `r` lights the
/// first `ceil(streaks_per_unit * r)` slots, with a common intensity chosen
/// so the summed squared streak energy is exactly
/// `streaks_per_unit * r * streak_length * streak_intensity^2`. Frames with
/// `r <= 20` therefore only ever touch the first `ceil(20 * streaks_per_unit)`
/// slots, and any frame above 20 lights at least one slot outside that set.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGenerator {
    pub side: usize,
    pub background: (f64, f64),
    pub disk_intensity: (f64, f64),
    pub disk_radius: (f64, f64),
    /// Range of the disk center coordinates, in pixels.
    pub disk_center: (f64, f64),
    pub pixel_noise: f64,
    pub streaks_per_unit: f64,
    pub streak_length: usize,
    pub streak_intensity: f64,
    /// Seed of the fixed order in which streak slots fill as `r` grows.
    pub mask_seed: u64,
    /// Largest per-step speed of the disk within an episode, in pixels.
    pub drift_speed: f64,
    pub seed: u64,
}

impl Default for SceneGenerator {
    fn default() -> Self {
        Self::with_side(16, 0)
    }
}

/// Nuisance parameters of one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub background: f64,
    pub intensity: f64,
    pub radius: f64,
    pub center: (f64, f64),
    pub velocity: (f64, f64),
}

impl SceneGenerator {
    pub fn with_side(side: usize, seed: u64) -> Self {
        let s = side as f64;
        Self {
            side,
            background: (1.175, 1.325),
            disk_intensity: (6.8, 7.2),
            disk_radius: (0.2175 * s, 0.2325 * s),
            disk_center: (0.48 * s, 0.52 * s),
            pixel_noise: 0.1,
            streaks_per_unit: 2.0,
            streak_length: 1,
            streak_intensity: 15.0,
            mask_seed: 0,
            drift_speed: 0.002,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return Err(Error::InvalidArgument("scene side must be at least 2".into()));
        }
        if self.streak_length == 0 || self.streak_length > self.side {
            return Err(Error::InvalidArgument("streak length must be in 1..=side".into()));
        }
        if !(self.pixel_noise >= 0.0 && self.streaks_per_unit >= 0.0 && self.streak_intensity >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise, streak rate and intensity must be nonnegative".into(),
            ));
        }
        let ranges = [self.background, self.disk_intensity, self.disk_radius, self.disk_center];
        if ranges
            .iter()
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidArgument(
                "scene ranges must be finite with lo <= hi".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    }

    pub fn sample_scene<R: Rng + ?Sized>(&self, rng: &mut R) -> SceneParams {
        let v = self.drift_speed;
        SceneParams {
            background: Self::uniform(rng, self.background),
            intensity: Self::uniform(rng, self.disk_intensity),
            radius: Self::uniform(rng, self.disk_radius),
            center: (
                Self::uniform(rng, self.disk_center),
                Self::uniform(rng, self.disk_center),
            ),
            velocity: (Self::uniform(rng, (-v, v)), Self::uniform(rng, (-v, v))),
        }
    }

    /// The uncorrupted image of `scene` after `t` steps of drift.
    pub fn base_image(&self, scene: &SceneParams, t: f64) -> Vec<f64> {
        let n = self.side;
        let lo = self.disk_center.0;
        let hi = self.disk_center.1;
        let cx = (scene.center.0 + scene.velocity.0 * t).clamp(lo, hi);
        let cy = (scene.center.1 + scene.velocity.1 * t).clamp(lo, hi);
        let mut img = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
                let cover = (scene.radius + 0.5 - d).clamp(0.0, 1.0);
                img.push(scene.background + cover * scene.intensity);
            }
        }
        img
    }

    /// Number of disjoint streak slots: vertical runs of `streak_length`
    /// pixels aligned to a grid.
    pub fn streak_slots(&self) -> usize {
        (self.side / self.streak_length) * self.side
    }

    /// Slot fill order; a fixed permutation determined by `mask_seed`.
    pub fn streak_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.streak_slots()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.mask_seed));
        order
    }

    /// Adds pixel noise and rain streaks for level `r` in place. Streaks
    /// occupy distinct slots, so at most [`Self::streak_slots`] fit.
    pub fn corrupt<R: Rng + ?Sized>(&self, img: &mut [f64], r: f64, rng: &mut R) {
        for p in img.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *p += self.pixel_noise * e;
        }
        let slots = self.streak_slots();
        let amount = (self.streaks_per_unit * r.max(0.0)).min(slots as f64);
        let count = amount.ceil() as usize;
        if count == 0 {
            return;
        }
        let intensity = self.streak_intensity * (amount / count as f64).sqrt();
        for &slot in &self.streak_order()[..count] {
            let x = slot % self.side;
            let y0 = (slot / self.side) * self.streak_length;
            for j in 0..self.streak_length {
                img[(y0 + j) * self.side + x] += intensity;
            }
        }
    }

    /// One frame of `scene` at step `t` and corruption level `r`.
    pub fn frame<R: Rng + ?Sized>(&self, scene: &SceneParams, t: f64, r: f64, rng: &mut R) -> Example {
        let mut img = self.base_image(scene, t);
        self.corrupt(&mut img, r, rng);
        Example::new(img).expect("finite frame")
    }

    /// Independent frames with `r` drawn uniformly from `r_range`; deterministic
    /// given the generator seed. Returns the examples and their `r` values.
    pub fn generate_dataset(&self, count: usize, r_range: (f64, f64)) -> Result<(Vec<Example>, Vec<f64>)> {
        self.validate()?;
        if count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        if !(r_range.0 <= r_range.1) || r_range.0 < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid r range {r_range:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut examples = Vec::with_capacity(count);
        let mut rs = Vec::with_capacity(count);
        for _ in 0..count {
            let scene = self.sample_scene(&mut rng);
            let r = Self::uniform(&mut rng, r_range);
            examples.push(self.frame(&scene, 0.0, r, &mut rng));
            rs.push(r);
        }
        Ok((examples, rs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let g = SceneGenerator::with_side(8, 42);
        let a = g.generate_dataset(1, (0.0, 20.0)).unwrap();
        let b = g.generate_dataset(1, (0.0, 20.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_r_adds_no_streaks() {
        let mut g = SceneGenerator::with_side(8, 1);
        g.pixel_noise = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scene = g.sample_scene(&mut rng);
        let base = g.base_image(&scene, 3.0);
        assert_eq!(g.frame(&scene, 3.0, 0.0, &mut rng).as_slice(), &base[..]);
    }

    #[test]
    fn squared_streak_energy_is_linear_in_r() {
        let mut g = SceneGenerator::with_side(16, 1);
        g.pixel_noise = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scene = g.sample_scene(&mut rng);
        let base = g.base_image(&scene, 0.0);
        for r in [0.3, 7.0, 19.9, 20.1, 25.5] {
            let frame = g.frame(&scene, 0.0, r, &mut rng);
            let energy: f64 = frame.iter().zip(&base).map(|(a, b)| (a - b).powi(2)).sum();
            let expected = g.streaks_per_unit * r * g.streak_length as f64 * g.streak_intensity.powi(2);
            assert!((energy - expected).abs() < 1e-9 * expected, "r={r}");
        }
    }

    #[test]
    fn streaks_saturate_at_slot_count() {
        let mut g = SceneGenerator::with_side(8, 1);
        g.pixel_noise = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scene = g.sample_scene(&mut rng);
        let base = g.base_image(&scene, 0.0);
        let frame = g.frame(&scene, 0.0, 1e6, &mut rng);
        assert!(frame
            .iter()
            .zip(&base)
            .all(|(a, b)| (a - b - g.streak_intensity).abs() < 1e-12));
    }

    #[test]
    fn in_range_frames_share_slots() {
        let g = SceneGenerator {
            pixel_noise: 0.0,
            ..SceneGenerator::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scene = g.sample_scene(&mut rng);
        let base = g.base_image(&scene, 0.0);
        let lit = |r: f64, rng: &mut ChaCha8Rng| -> Vec<bool> {
            let f = g.frame(&scene, 0.0, r, rng);
            f.iter().zip(&base).map(|(a, b)| a - b > 1e-9).collect()
        };
        let at_20 = lit(20.0, &mut rng);
        for r in [0.5, 7.3, 19.99] {
            let m = lit(r, &mut rng);
            assert!(m.iter().zip(&at_20).all(|(a, b)| !a || *b), "r={r}");
        }
        let above = lit(20.01, &mut rng);
        assert!(above.iter().zip(&at_20).any(|(a, b)| *a && !b));
    }

    #[test]
    fn mean_energy_increases_with_r() {
        let g = SceneGenerator::with_side(16, 3);
        let mut last = f64::NEG_INFINITY;
        for r in [0.0, 5.0, 10.0, 20.0, 30.0] {
            let (data, _) = g.generate_dataset(1000, (r, r)).unwrap();
            let e = data.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / 1000.0;
            assert!(e > last, "r={r}");
            last = e;
        }
    }

    #[test]
    fn rejects_zero_count() {
        assert!(SceneGenerator::default().generate_dataset(0, (0.0, 1.0)).is_err());
    }
}
