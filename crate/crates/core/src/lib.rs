pub mod bench;
pub mod docstore;
pub mod ingest;
pub mod layout;
pub mod mutation;
pub mod query;
pub mod temporal;
pub mod verify;
