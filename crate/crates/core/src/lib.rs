pub mod ast;
pub mod gf;
pub mod kernel;
pub mod oracle;
pub mod parser;
pub mod posterior;
pub mod taylor;
