//! Stationary velocity fields, RK4 flows and diffeomorphic registration.

mod adam;
mod network;
mod ode;
mod register;
mod trig;

pub use adam::{adam_step, Adam, AdamState};
pub use network::{FieldConfig, LinearField, VectorField, VelocityField, OMEGA0};
pub use ode::{
    flow_points, integrate, integrate_grad, invertibility_check, step_sizes, FlowGradient, FlowTrajectory,
    GradientMode, IntegrateOptions, RkStep, DEFAULT_STEP,
};
pub use register::{
    register_from, register_surfaces, sample_elements, DiffSamples, Flowable, Registration, RegistrationConfig,
};
pub(crate) use register::chamfer_with_grad;
