//! Interactive-view data curation: a spreadsheet-like sheet model, a
//! formula language, a script language of view operations and their
//! execution, compilation to SQL, script rewriting and notebooks.

pub mod executor;
pub mod formula;
pub mod lang;
pub mod lex;
pub mod model;
pub mod notebook;
pub mod rewrite;
pub mod sql;
pub mod value;
