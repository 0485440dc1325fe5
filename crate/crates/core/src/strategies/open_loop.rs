use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::noise::{subkey, NoisePath};
use crate::sde::ControlSet;

/// Information available to an open-loop adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfoLevel {
    /// Adapted to the Brownian filtration only.
    BrownianOnly,
    /// Also sees the independent auxiliary noise.
    Enlarged,
}

/// Noise observed by an open-loop generator when choosing `v_i`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseHistory<'a> {
    pub times: &'a [f64],
    /// Brownian increments of the intervals before `t_i`, row-major.
    pub dw: &'a [f64],
    pub dim_w: usize,
    /// Auxiliary increments before `t_i`; empty for Brownian-only generators.
    pub extra: &'a [f64],
    pub dim_extra: usize,
}

impl NoiseHistory<'_> {
    /// Number of observed increments.
    pub fn observed(&self) -> usize {
        self.dw.len().checked_div(self.dim_w).unwrap_or(0)
    }
}

/// Per-trajectory state of a custom generator.
pub trait GeneratorState {
    /// Control index for interval `i`, given the noise observed so far.
    fn next(&mut self, i: usize, history: &NoiseHistory<'_>) -> usize;
}

/// A user-defined open-loop control.
pub trait OpenLoopGenerator: Send + Sync {
    fn info_level(&self) -> InfoLevel;
    fn start(&self) -> Box<dyn GeneratorState>;
}

/// Built-in open-loop generators.
#[derive(Clone)]
pub enum Generator {
    Constant(usize),
    /// `nonneg` if `W_coord(t_i) >= 0`, else `neg`.
    SignOfBrownian {
        coord: usize,
        nonneg: usize,
        neg: usize,
    },
    /// `nonneg` if `B_coord(t_i) >= 0` for the auxiliary noise `B`, else `neg`.
    SignOfExtra {
        coord: usize,
        nonneg: usize,
        neg: usize,
    },
    /// Deterministic pseudo-random piecewise-constant control: `pieces` equal
    /// blocks of the grid, each holding a choice hashed from `key`.
    Piecewise {
        pieces: usize,
        key: u64,
    },
    /// A recorded control path.
    Replay(Arc<Vec<usize>>),
    Custom(Arc<dyn OpenLoopGenerator>),
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Constant(i) => write!(f, "constant({i})"),
            Generator::SignOfBrownian { coord, nonneg, neg } => write!(f, "sign_w[{coord}]({nonneg},{neg})"),
            Generator::SignOfExtra { coord, nonneg, neg } => write!(f, "sign_extra[{coord}]({nonneg},{neg})"),
            Generator::Piecewise { pieces, key } => write!(f, "piecewise({pieces}, {key:#x})"),
            Generator::Replay(p) => write!(f, "replay(len {})", p.len()),
            Generator::Custom(_) => write!(f, "custom"),
        }
    }
}

/// An adversary control process generator with its filtration.
#[derive(Debug, Clone)]
pub struct OpenLoopControl {
    pub name: String,
    pub generator: Generator,
    pub info: InfoLevel,
    /// Test-only: let `v_i` see the increment of interval `i` itself.
    pub lookahead: bool,
}

impl OpenLoopControl {
    pub fn new(name: impl Into<String>, generator: Generator) -> Self {
        let info = match &generator {
            Generator::SignOfExtra { .. } => InfoLevel::Enlarged,
            Generator::Custom(g) => g.info_level(),
            _ => InfoLevel::BrownianOnly,
        };
        Self {
            name: name.into(),
            generator,
            info,
            lookahead: false,
        }
    }

    pub fn constant(name: impl Into<String>, index: usize) -> Self {
        Self::new(name, Generator::Constant(index))
    }

    pub fn replay(name: impl Into<String>, path: Vec<usize>) -> Self {
        Self::new(name, Generator::Replay(Arc::new(path)))
    }

    /// Declares a wider filtration than the generator needs.
    pub fn with_info(mut self, info: InfoLevel) -> Self {
        if self.info == InfoLevel::BrownianOnly {
            self.info = info;
        }
        self
    }

    /// Anticipating variant, for negative tests only.
    pub fn with_lookahead(mut self) -> Self {
        self.lookahead = true;
        self
    }
}

/// The control path `v_0, ..., v_{N-1}` (one per grid interval).
///
/// `v_i` is computed from the increments of intervals `0..i` only (or `0..=i`
/// under `lookahead`), and emitted before any later increment is read.
pub fn realize_open_loop(ctrl: &OpenLoopControl, noise: &NoisePath, v: &ControlSet) -> Result<Vec<usize>> {
    let n = noise.steps();
    if ctrl.info == InfoLevel::Enlarged && noise.dim_extra == 0 {
        return Err(Error::Configuration(alloc::format!(
            "adversary {} needs the enlarged filtration but the noise has no auxiliary component",
            ctrl.name
        )));
    }
    let visible = |i: usize| if ctrl.lookahead { (i + 1).min(n) } else { i };
    let mut out = Vec::with_capacity(n);
    match &ctrl.generator {
        Generator::Constant(c) => out.resize(n, *c),
        Generator::SignOfBrownian { coord, nonneg, neg } | Generator::SignOfExtra { coord, nonneg, neg } => {
            let (data, dim) = match ctrl.generator {
                Generator::SignOfBrownian { .. } => (&noise.dw, noise.dim_w),
                _ => (&noise.extra, noise.dim_extra),
            };
            if *coord >= dim {
                return Err(Error::Configuration(alloc::format!(
                    "adversary {} reads noise coordinate {coord} of {dim}",
                    ctrl.name
                )));
            }
            let mut level = 0.0;
            let mut seen = 0;
            for i in 0..n {
                while seen < visible(i) {
                    level += data[seen * dim + coord];
                    seen += 1;
                }
                out.push(if level >= 0.0 { *nonneg } else { *neg });
            }
        }
        Generator::Piecewise { pieces, key } => {
            let pieces = (*pieces).max(1);
            for i in 0..n {
                let piece = i * pieces / n;
                out.push((subkey(*key, piece as u64) % v.len() as u64) as usize);
            }
        }
        Generator::Replay(path) => {
            if path.len() != n {
                return Err(Error::Configuration(alloc::format!(
                    "replay {} has {} controls for {n} intervals",
                    ctrl.name,
                    path.len()
                )));
            }
            out.extend_from_slice(path);
        }
        Generator::Custom(g) => {
            let mut state = g.start();
            let empty: &[f64] = &[];
            for i in 0..n {
                let k = visible(i);
                let history = NoiseHistory {
                    times: noise.grid.times(),
                    dw: &noise.dw[..k * noise.dim_w],
                    dim_w: noise.dim_w,
                    extra: if ctrl.info == InfoLevel::Enlarged {
                        &noise.extra[..k * noise.dim_extra]
                    } else {
                        empty
                    },
                    dim_extra: if ctrl.info == InfoLevel::Enlarged {
                        noise.dim_extra
                    } else {
                        0
                    },
                };
                out.push(state.next(i, &history));
            }
        }
    }
    if let Some(bad) = out.iter().find(|&&c| c >= v.len()) {
        return Err(Error::InvalidInput(alloc::format!(
            "adversary {} produced index {bad} outside V (size {})",
            ctrl.name,
            v.len()
        )));
    }
    Ok(out)
}
