use rayon::prelude::*;

/// Fixed-length bitset, one bit per pooled point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

const WORDS_PER_TASK: usize = 1024;

impl Bitset {
    pub fn new(len: usize) -> Self {
        Bitset {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut b = Bitset {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        b.trim();
        b
    }

    /// Builds the bitset by evaluating `f` for every index, in parallel.
    pub fn from_fn(len: usize, f: impl Fn(usize) -> bool + Sync) -> Self {
        let mut b = Bitset::new(len);
        b.words
            .par_chunks_mut(WORDS_PER_TASK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (k, w) in chunk.iter_mut().enumerate() {
                    let base = (c * WORDS_PER_TASK + k) * 64;
                    let end = (base + 64).min(len);
                    let mut word = 0u64;
                    for i in base..end {
                        word |= (f(i) as u64) << (i - base);
                    }
                    *w = word;
                }
            });
        b
    }

    /// Like [`Bitset::from_fn`] for a pool of contiguous segments: `starts`
    /// holds ascending segment starts (the first is 0) and `f` receives
    /// (segment, local index).
    pub fn from_segments(len: usize, starts: &[usize], f: impl Fn(usize, usize) -> bool + Sync) -> Self {
        let mut b = Bitset::new(len);
        if len == 0 {
            return b;
        }
        assert_eq!(starts.first(), Some(&0), "segments must start at 0");
        b.words
            .par_chunks_mut(WORDS_PER_TASK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let first = c * WORDS_PER_TASK * 64;
                let mut s = starts.partition_point(|&st| st <= first) - 1;
                let mut next = starts.get(s + 1).copied().unwrap_or(usize::MAX);
                for (k, w) in chunk.iter_mut().enumerate() {
                    let base = first + k * 64;
                    let end = (base + 64).min(len);
                    let mut word = 0u64;
                    for i in base..end {
                        while i >= next {
                            s += 1;
                            next = starts.get(s + 1).copied().unwrap_or(usize::MAX);
                        }
                        word |= (f(s, i - starts[s]) as u64) << (i - base);
                    }
                    *w = word;
                }
            });
        b
    }

    fn trim(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range (len {})", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range (len {})", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn unset(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range (len {})", self.len);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of set bits in `[start, end)`.
    pub fn count_range(&self, start: usize, end: usize) -> usize {
        self.iter_ones_in(start, end).count()
    }

    pub fn and_assign(&mut self, other: &Bitset) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn or_assign(&mut self, other: &Bitset) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.iter_ones_in(0, self.len)
    }

    /// Set bits in `[start, end)`, ascending.
    pub fn iter_ones_in(&self, start: usize, end: usize) -> impl Iterator<Item = usize> + '_ {
        let end = end.min(self.len);
        let first = start / 64;
        let last = end.div_ceil(64);
        (first..last.max(first)).flat_map(move |w| {
            let mut word = self.words[w];
            let base = w * 64;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let t = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(base + t)
            })
        })
        .filter(move |&i| i >= start && i < end)
    }

    /// Run lengths over `[start, end)`, alternating and starting with an
    /// unset run (which may be empty).
    pub fn runs(&self, start: usize, end: usize) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for i in start..end {
            let bit = self.get(i);
            if bit != current {
                runs.push(len);
                current = bit;
                len = 0;
            }
            len += 1;
        }
        if end > start {
            runs.push(len);
        }
        runs
    }
}
