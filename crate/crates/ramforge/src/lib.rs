//! Exact-arithmetic library for ramification filtrations of abelian subgroups of
//! the Nottingham group, Lubin-Tate formal groups over p-adic rings, the p^d
//! characteristic-zero ratio criterion, and the iterative conjugation (rectify)
//! algorithm for commuting power-series families.

pub mod criterion;
pub mod error;
pub mod herbrand;
pub mod lubintate;
pub mod nottingham;
pub mod ring;
pub mod series;

pub use error::{Error, ErrorClass, Result};
pub use herbrand::PiecewiseLinear;
pub use lubintate::{FormalGroupLaw, FrobeniusSeries, LazardReport, LazardSign};
pub use nottingham::{FiniteFiltration, NottElem, RamEntry, RamProfile};
pub use ring::{Fq, FqElem, OKElem, OkRing, RingSpec, Valuation};
pub use series::{BiSeries, CoeffRing, Series};

/// Series over the residue field F_q.
pub type FqSeries = Series<Fq>;
/// Series over O_K.
pub type OkSeries = Series<OkRing>;
/// Two-variable series over O_K.
pub type OkBiSeries = BiSeries<OkRing>;
/// Two-variable series over F_q.
pub type FqBiSeries = BiSeries<Fq>;
