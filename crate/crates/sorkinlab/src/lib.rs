pub mod format;
pub mod linalg;
pub mod quad;
pub mod resolutions;
pub mod spacetime;
pub mod gaussian_state;
pub mod propagators;
pub mod kraus;
pub mod fock_oracle;
pub mod scenario;
pub mod deco;
pub mod oscillator2d;
pub mod sampling;
pub mod cli;
