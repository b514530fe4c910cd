//! Seeded, deterministic workplace simulation for evaluating LLM agents.

pub mod canonical;
pub mod error;
pub mod harness;
pub mod metatask;
pub mod npc;
pub mod rng;
pub mod scenario;
pub mod session;
pub mod time;
pub mod tools;
pub mod trajectory;
pub mod verifier;
pub mod world;
