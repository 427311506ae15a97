#![allow(dead_code)]

pub mod dp_oracle;
pub mod instances;
pub mod lp_oracle;
