//! Payment requests emitted by the contract for the bank.
//!
//! Line format of the file-based event channel (one request per line, fields
//! separated by a single space, all binary fields lowercase hex):
//!
//! ```text
//! REQPAY v1 <req_pay_id 32B> <com_inc 48B> <ciphertext> <buyer_pub 32B> <buyer_signature 64B>
//! ```

use std::fmt;

use crate::identity::{PublicKey, Signature};
use crate::pedersen::Commitment;

use super::tx::{payment_signing_bytes, Digest32};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReqPay {
    pub req_pay_id: Digest32,
    pub com_inc: Commitment,
    pub ciphertext: Vec<u8>,
    pub buyer_pub: PublicKey,
    pub buyer_signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReqPayParseError(pub &'static str);

impl fmt::Display for ReqPayParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed payment request: {}", self.0)
    }
}

impl std::error::Error for ReqPayParseError {}

impl ReqPay {
    pub fn signature_valid(&self) -> bool {
        self.buyer_pub.verify(
            &payment_signing_bytes(&self.req_pay_id, Some(&self.com_inc), &self.ciphertext),
            &self.buyer_signature,
        )
    }

    pub fn to_line(&self) -> String {
        format!(
            "REQPAY v1 {} {} {} {} {}",
            hex::encode(self.req_pay_id),
            hex::encode(self.com_inc.to_bytes()),
            hex::encode(&self.ciphertext),
            self.buyer_pub.to_hex(),
            hex::encode(self.buyer_signature.0),
        )
    }

    pub fn from_line(line: &str) -> Result<Self, ReqPayParseError> {
        let f: Vec<&str> = line.trim_end().split(' ').collect();
        if f.len() != 7 || f[0] != "REQPAY" || f[1] != "v1" {
            return Err(ReqPayParseError("header"));
        }
        let arr =
            |s: &str, what| -> Result<Vec<u8>, ReqPayParseError> { hex::decode(s).map_err(|_| ReqPayParseError(what)) };
        let id: Digest32 = arr(f[2], "id")?.try_into().map_err(|_| ReqPayParseError("id length"))?;
        let com = Commitment::from_bytes(&arr(f[3], "commitment")?).map_err(|_| ReqPayParseError("commitment"))?;
        let ciphertext = arr(f[4], "ciphertext")?;
        let buyer_pub = PublicKey::from_hex(f[5]).ok_or(ReqPayParseError("buyer key"))?;
        let sig: [u8; 64] = arr(f[6], "signature")?
            .try_into()
            .map_err(|_| ReqPayParseError("signature length"))?;
        Ok(ReqPay {
            req_pay_id: id,
            com_inc: com,
            ciphertext,
            buyer_pub,
            buyer_signature: Signature(sig),
        })
    }
}
