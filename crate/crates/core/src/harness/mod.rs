//! Scenarios, replicate campaigns and operating characteristics.

pub mod campaign;
pub mod metrics;
pub mod scenario;

pub use campaign::{
    aggregate, replicate_seed, run_campaign, run_replicates, CampaignKind, OperatingCharacteristics, Replicate,
    Stage1Summary, Stage2Summary,
};
pub use metrics::{estimate_power, percent_selection, pointwise_bias, signed_distance};
pub use scenario::{builtin_pack, calibrated_truth, load_scenarios, Scenario, ScenarioPack};
