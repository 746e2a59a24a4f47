pub mod abe_audit;
