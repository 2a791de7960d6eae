#![allow(dead_code)]

pub mod geometry;
pub mod scan;
pub mod suite;
