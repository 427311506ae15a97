//! Benchmark model families.

mod inventory;
mod portfolio;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::StochasticProgram;

pub use inventory::{build_inventory, generate_inventory, InventorySpec, INVENTORY_DIM};
pub use portfolio::{
    build_portfolio, generate_portfolio, portfolio_cut_closedform, PortfolioSpec, RISK_FREE_RETURN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    SpecInvalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Portfolio,
    Inventory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub stages: usize,
    pub realizations: usize,
    /// Risky assets; ignored by the inventory family.
    pub assets: usize,
}

/// Generated benchmark instance of either family.
pub fn generate_instance(family: Family, params: InstanceParams, seed: u64) -> Result<StochasticProgram, ModelError> {
    match family {
        Family::Portfolio => build_portfolio(&generate_portfolio(
            params.stages,
            params.realizations,
            params.assets,
            seed,
        )?),
        Family::Inventory => build_inventory(&generate_inventory(params.stages, params.realizations, seed)?),
    }
}
