//! Fixtures shared by the benchmarks.

use plate_core::kirchhoff_love::KLState;
use plate_core::{BoundaryDatum, BoxGrid, LameParams};

pub fn lame2() -> LameParams {
    LameParams::new(1.0, 1.0, 2).expect("valid Lame pair")
}

pub fn bar(cells: usize) -> BoxGrid {
    BoxGrid::new(vec![0.0], vec![1.0], vec![cells]).expect("valid grid")
}

/// Membrane stretch plus a bending profile.
pub fn mixed_state(cells: usize) -> KLState {
    KLState::from_fns(bar(cells), |x| vec![0.4 * x[0]], |x| 0.3 * x[0] * x[0], |x| vec![0.6 * x[0]]).expect("finite state")
}

pub fn stretch_datum(cells: usize, t: f64) -> BoundaryDatum {
    let s = KLState::from_fns(bar(cells), move |x| vec![t * x[0]], |_| 0.0, |_| vec![0.0]).expect("finite state");
    BoundaryDatum::new(s).expect("valid datum")
}
