use attnwarp::tensor_io::{decode, encode, load, read_tensor, write_tensor};
use attnwarp::{FeatureMap, FormatError, Tensor};
use proptest::prelude::*;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/feature_1x2x2.fwt");

#[test]
fn reads_hand_encoded_fixture() {
    let t = load(FIXTURE).unwrap();
    assert_eq!(t.dims(), &[1, 2, 2]);
    assert_eq!(t.data(), &[1.0, -2.5, 0.125, 3.0]);
    let fm = FeatureMap::from_tensor(&t).unwrap();
    assert_eq!(fm.get(0, 1, 0), 0.125);
    assert_eq!(encode(&t).unwrap(), std::fs::read(FIXTURE).unwrap());
}

#[test]
fn header_bytes() {
    let bytes = std::fs::read(FIXTURE).unwrap();
    assert_eq!(&bytes[..4], b"FWT1");
    assert_eq!(bytes[4], 3);
    assert_eq!(bytes[17], 0);
    assert_eq!(bytes.len(), 4 + 1 + 12 + 1 + 16);
}

#[test]
fn damaged_files_are_rejected() {
    let good = std::fs::read(FIXTURE).unwrap();
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(matches!(decode(&bad_magic), Err(attnwarp::Error::Format(FormatError::BadMagic(_)))));
    let mut bad_dtype = good.clone();
    bad_dtype[17] = 7;
    assert!(matches!(decode(&bad_dtype), Err(attnwarp::Error::Format(FormatError::UnsupportedDtype(7)))));
    assert!(matches!(decode(&good[..good.len() - 1]), Err(attnwarp::Error::Format(_))));
    let mut trailing = good.clone();
    trailing.push(0);
    assert!(matches!(decode(&trailing), Err(attnwarp::Error::Format(FormatError::TrailingBytes(1)))));
    let mut rank0 = good;
    rank0[4] = 0;
    assert!(matches!(decode(&rank0), Err(attnwarp::Error::Format(FormatError::Rank(0)))));
}

fn tensor_strategy() -> impl Strategy<Value = Tensor> {
    prop::collection::vec(0usize..6, 1..=3).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), n)
            .prop_map(move |data| Tensor::new(dims.clone(), data).unwrap())
    })
}

proptest! {
    #[test]
    fn write_read_round_trip(t in tensor_strategy()) {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        prop_assert_eq!(buf.len(), t.encoded_len());
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(encode(&back).unwrap(), buf);
    }

    #[test]
    fn channel_order_survives(c in 1usize..5, h in 1usize..5, w in 1usize..5) {
        let fm = FeatureMap::from_fn(c, h, w, |ch, y, x| (ch * 100 + y * 10 + x) as f32).unwrap();
        let back = FeatureMap::from_tensor(&decode(&encode(&fm.to_tensor()).unwrap()).unwrap()).unwrap();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(back.get(ch, y, x), (ch * 100 + y * 10 + x) as f32);
                }
            }
        }
    }
}
