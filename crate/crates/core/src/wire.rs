//! Bit-exact report encodings.
//!
//! A packed FHR report is `index_x (r bits) | sign (1 bit) | index_y (r bits)`,
//! most significant bit first, zero-padded to a whole byte. `sign = 1` means
//! `index_x` carries `+1`; writers always emit 1, readers honor 0 by swapping
//! the two indices.
//!
//! Report files start with a 16-byte header: `b"FHR1"`, the exponent `r` as
//! one byte, three zero bytes, and the report count as a big-endian `u64`.
//! Packed records follow back to back.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hadamard::HadamardOrder;
use crate::mechanisms::FhrReport;

pub const MAGIC: &[u8; 4] = b"FHR1";
pub const HEADER_LEN: usize = 16;

/// Bits in one FHR report: `2r + 1`.
pub fn fhr_report_bits(order: HadamardOrder) -> u32 {
    2 * order.exponent() + 1
}

/// Bytes in one packed FHR report.
pub fn fhr_report_len(order: HadamardOrder) -> usize {
    fhr_report_bits(order).div_ceil(8) as usize
}

pub fn pack_fhr(report: &FhrReport, order: HadamardOrder) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(fhr_report_len(order));
    pack_fhr_into(report, order, &mut out)?;
    Ok(out)
}

fn pack_fhr_into(report: &FhrReport, order: HadamardOrder, out: &mut Vec<u8>) -> Result<()> {
    let r = order.exponent();
    for index in [report.index_x(), report.index_y()] {
        if index >= order.order() {
            return Err(Error::IndexOutOfBounds {
                index,
                order: order.order(),
            });
        }
    }
    let bits = fhr_report_bits(order);
    let len = fhr_report_len(order);
    let word = (report.index_x() << (r + 1)) | (1 << r) | report.index_y();
    let aligned = word << (len as u32 * 8 - bits);
    out.extend_from_slice(&aligned.to_be_bytes()[8 - len..]);
    Ok(())
}

pub fn unpack_fhr(bytes: &[u8], order: HadamardOrder) -> Result<FhrReport> {
    let len = fhr_report_len(order);
    if bytes.len() != len {
        return Err(Error::Length {
            expected: len,
            actual: bytes.len(),
        });
    }
    let r = order.exponent();
    let bits = fhr_report_bits(order);
    let mut buf = [0u8; 8];
    buf[8 - len..].copy_from_slice(bytes);
    let aligned = u64::from_be_bytes(buf);
    let pad = len as u32 * 8 - bits;
    if aligned & ((1u64 << pad) - 1) != 0 {
        return Err(Error::CorruptReport("nonzero padding bits".into()));
    }
    let word = aligned >> pad;
    let mask = order.order() - 1;
    let x = word >> (r + 1) & mask;
    let sign = word >> r & 1;
    let y = word & mask;
    if sign == 1 {
        FhrReport::new(x, y, order)
    } else {
        FhrReport::new(y, x, order)
    }
}

/// Report sizes in bits for a domain of `domain_size` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportSizes {
    pub domain_size: u64,
    pub fhr: u32,
    pub grr: u32,
    pub unary: u64,
    /// 64-bit hash seed plus `⌈log2 g⌉` bits of bucket.
    pub olh: u32,
    pub olh_hash_range: u32,
}

/// `⌈log2 x⌉` for `x ≥ 1`.
fn ceil_log2(x: u64) -> u32 {
    64 - (x - 1).leading_zeros()
}

pub const OLH_SEED_BITS: u32 = 64;

pub fn report_size_table(domain_size: u64, epsilon: f64) -> Result<ReportSizes> {
    if domain_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "domain size must be at least 2, got {domain_size}"
        )));
    }
    let order = HadamardOrder::for_domain(domain_size)?;
    let g = crate::params::PrivacyParams::olh(epsilon)?
        .hash_range()
        .expect("olh params carry g");
    Ok(ReportSizes {
        domain_size,
        fhr: fhr_report_bits(order),
        grr: ceil_log2(domain_size),
        unary: domain_size,
        olh: OLH_SEED_BITS + ceil_log2(g as u64),
        olh_hash_range: g,
    })
}

pub fn write_report_file<W: Write>(mut out: W, order: HadamardOrder, reports: &[FhrReport]) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4] = order.exponent() as u8;
    header[8..].copy_from_slice(&(reports.len() as u64).to_be_bytes());
    out.write_all(&header)?;
    let mut body = Vec::with_capacity(reports.len() * fhr_report_len(order));
    for report in reports {
        pack_fhr_into(report, order, &mut body)?;
    }
    out.write_all(&body)?;
    Ok(())
}

pub fn read_report_file<R: Read>(mut input: R) -> Result<(HadamardOrder, Vec<FhrReport>)> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::CorruptReport("bad magic".into()));
    }
    if header[5..8] != [0, 0, 0] {
        return Err(Error::CorruptReport("reserved header bytes must be zero".into()));
    }
    let order = HadamardOrder::new(header[4] as u32)?;
    let count = u64::from_be_bytes(header[8..].try_into().expect("8 bytes"));
    let len = fhr_report_len(order);
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    let expected = count
        .checked_mul(len as u64)
        .filter(|&b| b == body.len() as u64)
        .ok_or(Error::Length {
            expected: count.saturating_mul(len as u64) as usize,
            actual: body.len(),
        })?;
    let mut reports = Vec::with_capacity(expected as usize / len.max(1));
    for chunk in body.chunks_exact(len) {
        reports.push(unpack_fhr(chunk, order)?);
    }
    Ok((order, reports))
}

/// Debug form of one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonReport {
    pub index_x: u64,
    pub sign: u8,
    pub index_y: u64,
}

pub fn write_jsonl<W: Write>(mut out: W, reports: &[FhrReport]) -> Result<()> {
    for r in reports {
        let line = JsonReport {
            index_x: r.index_x(),
            sign: 1,
            index_y: r.index_y(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R, order: HadamardOrder) -> Result<Vec<FhrReport>> {
    let mut reports = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let j: JsonReport = serde_json::from_str(&line)?;
        let report = match j.sign {
            1 => FhrReport::new(j.index_x, j.index_y, order)?,
            0 => FhrReport::new(j.index_y, j.index_x, order)?,
            s => return Err(Error::CorruptReport(format!("sign bit {s}"))),
        };
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn o(r: u32) -> HadamardOrder {
        HadamardOrder::new(r).unwrap()
    }

    #[test]
    fn golden_byte() {
        let report = FhrReport::new(0, 1, o(2)).unwrap();
        assert_eq!(pack_fhr(&report, o(2)).unwrap(), vec![0x28]);
        assert_eq!(unpack_fhr(&[0x28], o(2)).unwrap(), report);
    }

    #[test]
    fn lengths() {
        assert_eq!(fhr_report_len(o(10)), 3);
        for r in 1..=31 {
            let len = fhr_report_len(o(r));
            assert_eq!(len, (2 * r as usize + 1).div_ceil(8));
            let max = o(r).order() - 1;
            let rep = FhrReport::new(max, 0, o(r)).unwrap();
            assert_eq!(pack_fhr(&rep, o(r)).unwrap().len(), len);
            assert_eq!(unpack_fhr(&pack_fhr(&rep, o(r)).unwrap(), o(r)).unwrap(), rep);
        }
    }

    #[test]
    fn exhaustive_round_trip() {
        for r in 1..=6 {
            let order = o(r);
            let n = order.order();
            for x in 0..n {
                for y in 0..n {
                    if x == y {
                        continue;
                    }
                    let rep = FhrReport::new(x, y, order).unwrap();
                    let bytes = pack_fhr(&rep, order).unwrap();
                    assert_eq!(unpack_fhr(&bytes, order).unwrap(), rep);
                }
            }
        }
    }

    #[test]
    #[allow(clippy::unusual_byte_groupings)]
    fn unpack_errors() {
        assert!(matches!(
            unpack_fhr(&[0x28, 0], o(2)),
            Err(Error::Length { expected: 1, actual: 2 })
        ));
        // x = 1, sign = 1, y = 1
        assert!(matches!(unpack_fhr(&[0b01101_000], o(2)), Err(Error::EqualIndices(1))));
        assert!(matches!(unpack_fhr(&[0b00101_001], o(2)), Err(Error::CorruptReport(_))));
        // sign = 0 swaps the roles.
        let swapped = unpack_fhr(&[0b00001_000], o(2)).unwrap();
        assert_eq!((swapped.index_x(), swapped.index_y()), (1, 0));
    }

    #[test]
    fn pack_rejects_foreign_order() {
        let big = FhrReport::new(9, 1, o(4)).unwrap();
        assert!(matches!(pack_fhr(&big, o(3)), Err(Error::IndexOutOfBounds { .. })));
    }

    #[test]
    fn size_table() {
        let t = report_size_table(1023, 1.0).unwrap();
        assert_eq!((t.fhr, t.unary), (21, 1023));
        assert_eq!(t.grr, 10);
        assert_eq!(t.olh, 65);
        // Two items plus the reserved row need order 4, so r = 2.
        assert_eq!(report_size_table(2, 1.0).unwrap().fhr, 5);
        assert_eq!(report_size_table(3, 1.0).unwrap().fhr, 5);
        assert!(report_size_table(1, 1.0).is_err());
        assert_eq!(report_size_table(9, 1.0).unwrap().fhr, 9);
        for d in 10..=1u64 << 16 {
            let t = report_size_table(d, 1.0).unwrap();
            assert!((t.fhr as u64) < t.unary, "d = {d}");
        }
    }

    #[test]
    fn report_file_round_trip() {
        let order = o(10);
        let reports: Vec<FhrReport> = (0..50u64)
            .map(|i| FhrReport::new(i * 13 % 1024, (i * 29 + 1) % 1024, order).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_report_file(&mut buf, order, &reports).unwrap();
        assert_eq!(&buf[..4], b"FHR1");
        assert_eq!(buf.len(), HEADER_LEN + 50 * 3);
        let (back_order, back) = read_report_file(&buf[..]).unwrap();
        assert_eq!(back_order, order);
        assert_eq!(back, reports);

        assert!(read_report_file(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_report_file(&bad[..]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let order = o(3);
        let reports = vec![FhrReport::new(1, 2, order).unwrap(), FhrReport::new(7, 0, order).unwrap()];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"index_x":1,"sign":1,"index_y":2}"#);
        assert_eq!(read_jsonl(&buf[..], order).unwrap(), reports);
        assert!(read_jsonl(&br#"{"index_x":1,"sign":2,"index_y":2}"#[..], order).is_err());
    }

    proptest! {
        #[test]
        fn unpack_never_panics(r in 1u32..=31, bytes in prop::collection::vec(any::<u8>(), 0..10)) {
            let _ = unpack_fhr(&bytes, o(r));
        }

        #[test]
        fn report_file_reader_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = read_report_file(&bytes[..]);
        }

        #[test]
        fn accepted_bytes_repack_canonically(r in 1u32..=8, raw in any::<u32>()) {
            let order = o(r);
            let len = fhr_report_len(order);
            let bytes = &raw.to_be_bytes()[4 - len..];
            if let Ok(rep) = unpack_fhr(bytes, order) {
                let again = pack_fhr(&rep, order).unwrap();
                prop_assert_eq!(unpack_fhr(&again, order).unwrap(), rep);
            }
        }
    }
}
