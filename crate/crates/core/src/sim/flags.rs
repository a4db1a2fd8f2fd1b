//! Flag accounting for one post under one decision threshold.
//!
//! A down run that lasts `θ` seconds gets flagged at `start + θ`. In the
//! multi scenario the adversary flags the same run again at `start + 2θ`,
//! `start + 3θ`, … while it stays down. In the once scenario only the first
//! flag on a post counts.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct PostTally {
    pub fp_multi: u64,
    pub tp_multi: u64,
    pub fp_once: u64,
    pub tp_once: u64,
    pub fn_once: u64,
    pub deleted: u64,
    pub censored: u64,
}

pub(crate) struct FlagTracker {
    theta: u64,
    end: u64,
    t_del: u64,
    once_flagged: bool,
    pub out: PostTally,
}

impl FlagTracker {
    /// `t_del = u64::MAX` for posts never deleted.
    pub fn new(theta: u64, end: u64, t_del: u64) -> Self {
        FlagTracker {
            theta,
            end,
            t_del,
            once_flagged: false,
            out: PostTally {
                deleted: u64::from(t_del != u64::MAX),
                ..PostTally::default()
            },
        }
    }

    fn false_flags(&mut self, count: u64) {
        if count == 0 {
            return;
        }
        self.out.fp_multi += count;
        if !self.once_flagged {
            self.once_flagged = true;
            self.out.fp_once += 1;
        }
    }

    /// A down phase `[u, u + len)` that ended with the post still alive.
    pub fn long_down(&mut self, u: u64, len: u64) {
        if u >= self.end {
            return;
        }
        let within = (self.end - u) / self.theta;
        self.false_flags((len / self.theta).min(within));
    }

    /// The post went down at `tau` and never came back (deleted at `t_del ≥ tau`).
    pub fn terminal(&mut self, tau: u64) {
        debug_assert!(tau <= self.t_del);
        let gap = self.t_del - tau;
        // index of the first flag at or after the deletion
        let first_true = gap.div_ceil(self.theta).max(1);
        self.false_flags(first_true - 1);
        let detected = tau.saturating_add(first_true.saturating_mul(self.theta));
        if detected <= self.end {
            self.out.tp_multi = 1;
            if self.once_flagged {
                self.out.fn_once = 1;
            } else {
                self.out.tp_once = 1;
            }
        } else {
            self.out.censored = 1;
        }
    }
}
