//! Counter-based 64-bit generator with hash-derived sub-streams.
//!
//! Every random decision in the crate is drawn from a [`Stream`]. A stream is
//! identified by a 64-bit key and produces `mix(key + counter * GOLDEN)` for
//! counter = 0, 1, 2, ... (the SplitMix64 output function applied to a
//! Weyl sequence). Keys are derived with [`derive_key`], which folds a parent
//! key and a list of string/integer tags through FNV-1a and the same mixer.
//! Deriving a sub-stream never consumes values from the parent, so adding a
//! new component tag leaves every existing stream untouched.
//!
//! The output depends only on integer arithmetic with wrapping semantics and
//! is identical on every platform.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A component of a stream path.
#[derive(Debug, Clone, Copy)]
pub enum Tag<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for Tag<'a> {
    fn from(s: &'a str) -> Self {
        Tag::Str(s)
    }
}

impl<'a> From<&'a String> for Tag<'a> {
    fn from(s: &'a String) -> Self {
        Tag::Str(s.as_str())
    }
}

impl From<u64> for Tag<'_> {
    fn from(v: u64) -> Self {
        Tag::Int(v)
    }
}

impl From<usize> for Tag<'_> {
    fn from(v: usize) -> Self {
        Tag::Int(v as u64)
    }
}

impl From<u32> for Tag<'_> {
    fn from(v: u32) -> Self {
        Tag::Int(v as u64)
    }
}

/// Derives a child key from `parent` and `tags`.
pub fn derive_key(parent: u64, tags: &[Tag<'_>]) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(parent);
    for tag in tags {
        // Type marker and length prefix keep ("ab","c") distinct from ("a","bc").
        let (marker, bytes): (u8, Vec<u8>) = match tag {
            Tag::Str(s) => (0x53, s.as_bytes().to_vec()),
            Tag::Int(v) => (0x49, v.to_le_bytes().to_vec()),
        };
        for b in std::iter::once(marker)
            .chain((bytes.len() as u32).to_le_bytes())
            .chain(bytes)
        {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    mix64(h)
}

#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Stream keyed by `derive_key(parent, tags)`.
    pub fn derive(parent: u64, tags: &[Tag<'_>]) -> Self {
        Self::new(derive_key(parent, tags))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform in `[0, n)` by rejection sampling. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform in the inclusive range `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "empty range {lo}..={hi}");
        let span = (hi - lo) as u64 + 1;
        lo + self.below(span) as i64
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values_are_frozen() {
        // SplitMix64 reference: seed 0 state advanced once gives 0xe220a8397b1dcdaf.
        let mut s = Stream::new(0);
        s.counter = 1;
        assert_eq!(s.next_u64(), 0xe220_a839_7b1d_cdaf);
        let a = derive_key(42, &["rule".into(), "personas".into()]);
        let b = derive_key(42, &["rule".into(), "personas".into()]);
        assert_eq!(a, b);
        assert_ne!(a, derive_key(42, &["rule".into(), "numerics".into()]));
    }

    #[test]
    fn tags_are_length_prefixed() {
        let a = derive_key(1, &["ab".into(), "c".into()]);
        let b = derive_key(1, &["a".into(), "bc".into()]);
        assert_ne!(a, b);
        assert_ne!(
            derive_key(1, &[Tag::Int(5)]),
            derive_key(1, &[Tag::Str("5")])
        );
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut s = Stream::new(7);
        let mut counts = [0u32; 5];
        for _ in 0..50_000 {
            counts[s.below(5) as usize] += 1;
        }
        for c in counts {
            assert!((9_500..10_500).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn sample_indices_distinct() {
        let mut s = Stream::new(3);
        let v = s.sample_indices(10, 10);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }
}
