#![allow(dead_code, clippy::needless_range_loop)]

pub mod algo_oracle;
pub mod cypher_oracle;
pub mod embed_oracle;
pub mod evalfix;
pub mod forge;
pub mod graphs;
pub mod nlp;
pub mod updates;
