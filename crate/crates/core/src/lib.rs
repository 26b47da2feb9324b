pub mod codegen;
pub mod density;
pub mod design;
pub mod formula;
pub mod infer;
pub mod modelspec;
pub mod tabular;
