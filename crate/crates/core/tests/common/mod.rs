#![allow(dead_code)]

pub mod models;
pub mod oracles;
pub mod render;
pub mod shapes;
