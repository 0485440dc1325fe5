/// A discrete path prefix `y(t_0), ..., y(t_i)` on a grid `t_0 < ... < t_N`.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    times: &'a [f64],
    states: &'a [f64],
    dim: usize,
}

impl<'a> PathView<'a> {
    /// `states` holds `len × dim` values, `1 <= len <= times.len()`.
    pub fn new(times: &'a [f64], states: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && !states.is_empty() && states.len().is_multiple_of(dim));
        assert!(states.len() / dim <= times.len(), "path longer than its grid");
        Self { times, states, dim }
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observed states.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the last observed state.
    pub fn last_index(&self) -> usize {
        self.len() - 1
    }

    /// Index of the terminal grid time `T`.
    pub fn horizon_index(&self) -> usize {
        self.times.len() - 1
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.times.len()
    }

    pub fn state(&self, i: usize) -> &'a [f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// The prefix ending at index `i` (inclusive).
    pub fn truncate(&self, i: usize) -> PathView<'a> {
        let i = i.min(self.last_index());
        PathView {
            times: self.times,
            states: &self.states[..(i + 1) * self.dim],
            dim: self.dim,
        }
    }

    /// First grid index whose time is `>= t` up to round-off.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let tol = 1e-12 * (1.0 + libm::fabs(t));
        self.times.partition_point(|&ti| ti < t - tol).min(self.times.len() - 1)
    }
}
