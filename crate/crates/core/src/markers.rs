//! Reserved-name markers shared by the translation and the target calculus.
//!
//! Translated source names, coordination channels, internal tau channels and
//! constant channels each carry a distinct prefix so that a communication
//! subject can be classified by inspection even after alpha-renaming (the
//! canonical renamer preserves the prefix).

/// Prefix of a translated source name.
pub const SOURCE_PREFIX: &str = "s_";
/// Prefix of a reserved coordination channel instance.
pub const COORD_PREFIX: &str = "#i";
/// Prefix of a reserved internal-tau channel instance.
pub const TAU_PREFIX: &str = "#t";
/// Prefix of a process-constant channel.
pub const CONST_PREFIX: &str = "#C_";

/// The marker category of a name, used both by step classification and by
/// canonical alpha-renaming (which must not erase a marker).
pub fn marker_category(name: &str) -> &'static str {
    if name.starts_with(CONST_PREFIX) {
        CONST_PREFIX
    } else if name.starts_with(TAU_PREFIX) {
        TAU_PREFIX
    } else if name.starts_with(COORD_PREFIX) {
        COORD_PREFIX
    } else if name.starts_with(SOURCE_PREFIX) {
        SOURCE_PREFIX
    } else {
        ""
    }
}
