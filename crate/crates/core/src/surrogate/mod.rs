//! Neural surrogate identification: an MLP vector field learned inside a
//! (possibly lifted, possibly hybrid) ODE, trained on the trace dataset.

mod lifting;
mod mlp;
mod model;
mod train;

pub use lifting::{build_lifting, StateLifting};
pub use mlp::{ForwardCache, MlpVectorField};
pub use model::{lifted_initial_state, KnownDynamics, SurrogateModel};
pub use train::{
    dataset_loss, load_checkpoint, loss_gradient, save_checkpoint, train, Checkpoint, TrainConfig,
    CHECKPOINT_SCHEMA_VERSION, HIDDEN_SIZES,
};
