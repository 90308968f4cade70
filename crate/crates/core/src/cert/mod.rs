//! Signed, linked logic sets.
//!
//! A [`LogicSet`] is named by its [`Token`], a hash of its issuer and label,
//! so anyone holding a token can fetch the set and check that it came from
//! the right principal without trusting the store that served it.

mod id;
mod key;
mod set;

pub use id::{make_token, new_scid, principal_id_from_key, root_id, IdError, PrincipalId, Scid, Token, MAX_LABEL_LEN};
pub use key::{armor, dearmor, principal_id, verify_signature, Ed25519Key, KeyError, KeyHandle, ED25519};
pub use set::{
    build_and_sign, decode, encode, from_armor, to_armor, verify_certificate, verify_encoded, BuildError, Certificate,
    DecodeError, LogicSet, ValidatedSet, Validity, VerifyError, CERT_VERSION, SET_VERSION,
};
