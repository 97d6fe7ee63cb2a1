//! Sparse evaluation of additive per-position scores over every tuple of
//! low-weight codewords.
//!
//! A score is `Σ_j δ(U_j, y_j)` where `U_j` is the set of users whose
//! codeword has a 1 at position `j` and `δ(∅, ·)` is folded into a baseline.
//! Per-user partial sums are computed once per observation, so a tuple costs
//! `O(K)` plus the positions where two or more users collide.

use std::ops::ControlFlow;

/// A sum of log-domain terms that may include `±∞`, tracked by count so that
/// an infinite term can later be removed again.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct LogSum {
    finite: f64,
    neg_inf: i32,
    pos_inf: i32,
}

impl LogSum {
    pub(crate) fn of(x: f64) -> Self {
        if x.is_nan() || x == f64::NEG_INFINITY {
            LogSum { neg_inf: 1, ..Default::default() }
        } else if x == f64::INFINITY {
            LogSum { pos_inf: 1, ..Default::default() }
        } else {
            LogSum { finite: x, ..Default::default() }
        }
    }

    pub(crate) fn add(self, o: LogSum) -> Self {
        LogSum { finite: self.finite + o.finite, neg_inf: self.neg_inf + o.neg_inf, pos_inf: self.pos_inf + o.pos_inf }
    }

    /// Removes terms previously added.
    pub(crate) fn remove(self, o: LogSum) -> Self {
        LogSum { finite: self.finite - o.finite, neg_inf: self.neg_inf - o.neg_inf, pos_inf: self.pos_inf - o.pos_inf }
    }

    pub(crate) fn value(self) -> f64 {
        if self.neg_inf > 0 {
            f64::NEG_INFINITY
        } else if self.pos_inf > 0 {
            f64::INFINITY
        } else {
            self.finite
        }
    }
}

/// Per-position score increments: `delta[c][u][y]` is the change in score
/// channel `c` when exactly the users in bitmask `u` are active at a position
/// showing symbol `y`, relative to all users silent.
pub(crate) struct TupleScorer<'a> {
    pub delta: &'a [Vec<Vec<LogSum>>],
}

impl<'a> TupleScorer<'a> {
    pub(crate) fn channels(&self) -> usize {
        self.delta.len()
    }

    /// Visits every tuple `(w_1, …, w_K)` with `w_k` drawn from `words[k]`
    /// (sparse supports), passing the tuple's indices and its score per
    /// channel (`baseline[c]` plus the increments). Stops early when the
    /// visitor breaks.
    pub(crate) fn for_each<F>(&self, words: &[Vec<&[u32]>], obs: &[u16], baseline: &[LogSum], scratch: &mut Vec<u32>, mut visit: F)
    where
        F: FnMut(&[usize], &[LogSum]) -> ControlFlow<()>,
    {
        let users = words.len();
        let channels = self.channels();
        if words.iter().any(|w| w.is_empty()) {
            return;
        }
        // per-user partial sums assuming no collisions
        let partial: Vec<Vec<Vec<LogSum>>> = (0..users)
            .map(|k| {
                let bit = 1usize << k;
                words[k]
                    .iter()
                    .map(|supp| {
                        (0..channels)
                            .map(|c| {
                                supp.iter().fold(LogSum::default(), |acc, &j| acc.add(self.delta[c][bit][obs[j as usize] as usize]))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        if scratch.len() < obs.len() {
            scratch.resize(obs.len(), 0);
        }
        let mut idx = vec![0usize; users];
        let mut score = vec![LogSum::default(); channels];
        let mut touched: Vec<u32> = Vec::new();
        loop {
            for c in 0..channels {
                score[c] = (0..users).fold(baseline[c], |acc, k| acc.add(partial[k][idx[k]][c]));
            }
            if users > 1 {
                touched.clear();
                for k in 0..users {
                    for &j in words[k][idx[k]] {
                        if scratch[j as usize] == 0 {
                            touched.push(j);
                        }
                        scratch[j as usize] |= 1 << k;
                    }
                }
                for &j in &touched {
                    let u = scratch[j as usize] as usize;
                    if u.count_ones() > 1 {
                        let y = obs[j as usize] as usize;
                        for c in 0..channels {
                            let mut corr = self.delta[c][u][y];
                            for k in 0..users {
                                if u & (1 << k) != 0 {
                                    corr = corr.remove(self.delta[c][1 << k][y]);
                                }
                            }
                            score[c] = score[c].add(corr);
                        }
                    }
                    scratch[j as usize] = 0;
                }
            }
            if visit(&idx, &score).is_break() {
                return;
            }
            // mixed-radix increment
            let mut k = 0;
            loop {
                if k == users {
                    return;
                }
                idx[k] += 1;
                if idx[k] < words[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}
