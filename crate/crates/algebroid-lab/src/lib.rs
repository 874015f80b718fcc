//! Computational engine for secondary characteristic classes of trivialized
//! Lie algebroids over flat tori: flat L-connections, the characteristic
//! cochain maps and their universal factorization, Chern–Simons transgression,
//! trace and Pfaffian classes, and machine-checkable verification reports.

pub mod algebroid;
pub mod classes;
pub mod combi;
pub mod config;
pub mod connection;
pub mod error;
pub mod fields;
pub mod liealg;
pub mod report;
pub mod scenario;

pub use error::Error;
