//! Counter-based splittable keys.
//!
//! A [`RngKey`] names one independent stream of standard normals. Child keys
//! are derived structurally from `(branch, indices)`, so the randomness used
//! by any sub-computation depends only on where it sits in the recursion and
//! never on evaluation order.
//!
//! Root keys come from a 64-bit seed: `state = (mix64(seed), mix64(seed ^ ROOT_SALT))`,
//! `digest = 0`. Draw `j` of a key's stream is `mix64(state.0 + (j + 1) * gamma)`
//! where `gamma` is an odd constant derived from `state.1`, the same
//! construction as SplitMix64.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const ROOT_SALT: u64 = 0x6a09_e667_f3bc_c909;

/// Stafford's variant 13 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix_gamma(z: u64) -> u64 {
    let mut g = mix64(z.wrapping_add(GOLDEN)) | 1;
    // Reject gammas with too few bit transitions (as in SplittableRandom).
    if (g ^ (g >> 1)).count_ones() < 24 {
        g ^= 0xaaaa_aaaa_aaaa_aaaa;
    }
    g
}

/// Tags distinguishing the sibling families a key can be split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Branch {
    /// Terminal-condition samples `(θ, 0, -i)`.
    TerminalSample = 1,
    /// Inner iterate `U_l` at a quadrature node, `(θ, l, i, t)`.
    FSampleCurrent = 2,
    /// Inner iterate `U_{l-1}` at a quadrature node, `(θ, -l, i, t)`.
    FSamplePrevious = 3,
    /// Brownian path shared by all nodes of one nonlinearity sample, `(θ, l, i)`.
    Path = 4,
    /// Independent repetitions of a whole experiment.
    Run = 5,
}

/// 128-bit key naming one stream, plus a digest of the index path that
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey {
    state: (u64, u64),
    path_digest: u64,
}

impl RngKey {
    pub fn from_seed(seed: u64) -> Self {
        RngKey {
            state: (mix64(seed), mix64(seed ^ ROOT_SALT)),
            path_digest: 0,
        }
    }

    pub fn state(&self) -> u128 {
        (u128::from(self.state.0) << 64) | u128::from(self.state.1)
    }

    pub fn path_digest(&self) -> u64 {
        self.path_digest
    }

    /// Derives the key for `(branch, indices)` below `self`.
    pub fn child(&self, branch: Branch, indices: &[u64]) -> RngKey {
        let (mut h0, mut h1) = self.state;
        let mut absorb = |w: u64| {
            h0 = mix64(h0 ^ w.wrapping_mul(GOLDEN)).wrapping_add(h1);
            h1 = mix64(h1.wrapping_add(w) ^ h0.rotate_left(29));
        };
        absorb(branch as u64);
        absorb(indices.len() as u64);
        for &i in indices {
            absorb(i);
        }
        let s0 = mix64(h0 ^ h1.rotate_left(32));
        let s1 = mix64(h1.wrapping_add(GOLDEN) ^ s0);

        let mut digest = self.path_digest ^ (branch as u64).wrapping_mul(GOLDEN);
        for &i in indices {
            digest = mix64(digest ^ i).wrapping_add(GOLDEN);
        }
        RngKey {
            state: (s0, s1),
            path_digest: mix64(digest),
        }
    }

    /// Sequential reader over this key's stream, starting at draw 0.
    pub fn stream(&self) -> NormalStream {
        NormalStream {
            base: self.state.0,
            gamma: mix_gamma(self.state.1),
            counter: 0,
        }
    }
}

/// Derives a child key; free-function form of [`RngKey::child`].
pub fn derive_child_key(parent: &RngKey, branch: Branch, indices: &[u64]) -> RngKey {
    parent.child(branch, indices)
}

/// Reader over the counter-indexed stream of a key.
#[derive(Debug, Clone)]
pub struct NormalStream {
    base: u64,
    gamma: u64,
    counter: u64,
}

impl NormalStream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(
            self.base
                .wrapping_add(self.counter.wrapping_mul(self.gamma)),
        )
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of the CDF.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }

    pub fn draws(&self) -> u64 {
        self.counter
    }
}

/// Wichura's AS241 (PPND16) rational approximation of the standard normal
/// quantile, relative accuracy about 1e-16.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

    #[test]
    fn child_keys_are_deterministic() {
        let root = RngKey::from_seed(2016);
        let a = root.child(Branch::FSampleCurrent, &[2, 5, 1]);
        let b = root.child(Branch::FSampleCurrent, &[2, 5, 1]);
        assert_eq!(a, b);
    }

    #[test]
    fn branch_tags_separate_current_and_previous() {
        let root = RngKey::from_seed(7);
        let cur = derive_child_key(&root, Branch::FSampleCurrent, &[2, 5, 1]);
        let prev = derive_child_key(&root, Branch::FSamplePrevious, &[2, 5, 1]);
        assert_ne!(cur.state(), prev.state());
        assert_ne!(cur.path_digest(), prev.path_digest());
    }

    #[test]
    fn index_lists_of_different_length_do_not_alias() {
        let root = RngKey::from_seed(1);
        let a = root.child(Branch::Path, &[1, 0]);
        let b = root.child(Branch::Path, &[1]);
        let c = root.child(Branch::Path, &[1, 0, 0]);
        assert_ne!(a.state(), b.state());
        assert_ne!(a.state(), c.state());
    }

    #[test]
    fn distinct_seeds_give_distinct_roots() {
        let keys: std::collections::HashSet<u128> = (0..10_000u64)
            .map(|s| RngKey::from_seed(s).state())
            .collect();
        assert_eq!(keys.len(), 10_000);
    }

    #[test]
    fn inverse_cdf_matches_reference_quantiles() {
        // 40-digit quantiles from an arbitrary precision erfinv.
        // Uniforms never fall below 2^-54, so that bounds the domain probed.
        let table = [
            (5.6e-17, -8.291_318_431_375_108),
            (1e-16, -8.222_082_216_130_436),
            (1e-10, -6.361_340_902_404_056),
            (1e-5, -4.264_890_793_922_825),
            (0.001, -3.090_232_306_167_813_5),
            (0.02425, -1.972_961_051_311_885),
            (0.1, -1.281_551_565_544_600_5),
            (0.3, -0.524_400_512_708_040_8),
            (0.7, 0.524_400_512_708_040_8),
            (0.9, 1.281_551_565_544_600_5),
            (0.975, 1.959_963_984_540_054),
        ];
        for (p, z) in table {
            let got = inverse_normal_cdf(p);
            assert!(((got - z) / z).abs() < 1e-14, "p={p} got={got} want={z}");
        }
        assert_eq!(inverse_normal_cdf(0.5), 0.0);

        // Round trip through an independent CDF away from the far tail,
        // which is itself only accurate to about 1e-10.
        let n = Normal::new(0.0, 1.0).unwrap();
        for &p in &[1e-10, 1e-5, 0.001, 0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
            let back = n.cdf(inverse_normal_cdf(p));
            assert!(((back - p) / p).abs() < 1e-9, "p={p} cdf={back}");
        }
    }

    #[test]
    fn inverse_cdf_is_odd() {
        // Probabilities whose complement is exact in binary.
        for &p in &[0.5f64.powi(40), 0.5f64.powi(7), 0.25, 0.375] {
            assert_eq!(inverse_normal_cdf(p), -inverse_normal_cdf(1.0 - p));
        }
    }

    #[test]
    fn sibling_first_draws_are_uniform() {
        // 10^6 sibling keys, first uniform of each, 100 equal bins.
        let root = RngKey::from_seed(99);
        let bins = 100usize;
        let n = 1_000_000u64;
        let mut counts = vec![0u64; bins];
        for i in 0..n {
            let u = root.child(Branch::Run, &[i]).stream().next_uniform();
            counts[(u * bins as f64) as usize] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let crit = ChiSquared::new((bins - 1) as f64)
            .unwrap()
            .inverse_cdf(1.0 - 1e-3);
        assert!(chi2 < crit, "chi2={chi2} crit={crit}");
    }

    #[test]
    fn stream_counts_draws() {
        let mut s = RngKey::from_seed(3).stream();
        for _ in 0..17 {
            s.next_normal();
        }
        assert_eq!(s.draws(), 17);
    }
}
