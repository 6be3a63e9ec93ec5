//! Library surface of the `forminv` command-line tool: argument types, the
//! dispatcher, and the content-addressed parse cache. The binary is a thin
//! wrapper so integration tests can drive the same code paths in-process.

pub mod cache;
pub mod cli;

pub use cache::{load_matrix, Cache, CacheStats};
pub use cli::{
    run, run_main, CliConfig, Command, Format, ENV_CACHE_DIR, EXIT_DEGENERATE, EXIT_OK,
    EXIT_VALIDATION,
};
