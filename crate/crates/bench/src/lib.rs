//! Shared fixtures for the criterion benches.

use pinchflow::flow::{FlowState, PdeStepControl};
use pinchflow::profile::{dumbbell, DumbbellShape, ProfileCurve};

pub const SHAPE: DumbbellShape = DumbbellShape { half_length: 0.8, neck_radius: 0.06, bulb_radius: 0.16 };

pub fn dumbbell_profile(nodes: usize) -> ProfileCurve {
    dumbbell(SHAPE, nodes, 1.0).expect("dumbbell profile")
}

pub fn dumbbell_state(nodes: usize) -> FlowState {
    FlowState::new(dumbbell_profile(nodes), 4, &PdeStepControl::default()).expect("initial state")
}
