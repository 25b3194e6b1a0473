use proptest::prelude::*;
use skycast_core::forecast::{decode_to_ghi, encode_target, poc_forecast, DecodeContext, EncodeError, TargetRepresentation};

fn case() -> impl Strategy<Value = (Vec<f64>, DecodeContext)> {
    (1usize..13, 0.0f64..1.6).prop_flat_map(|(h, csi_0)| {
        (
            proptest::collection::vec(20.0f64..1100.0, h),
            proptest::collection::vec(0.0f64..1.9, h),
            0.0f64..1200.0,
        )
            .prop_map(move |(cs, csi, ghi_0)| {
                let ghi: Vec<f64> = cs.iter().zip(&csi).map(|(c, k)| c * k).collect();
                (
                    ghi,
                    DecodeContext {
                        ghi_0,
                        csi_0,
                        ghi_cs_horizons: cs,
                    },
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn encode_then_decode_recovers_ghi((ghi, ctx) in case()) {
        for kind in TargetRepresentation::ALL {
            let enc = encode_target(kind, &ghi, &ctx).unwrap();
            let dec = decode_to_ghi(kind, &enc, &ctx);
            prop_assert_eq!(dec.clamped, 0);
            for (a, b) in dec.ghi.iter().zip(&ghi) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_delta_csi_is_persistence((ghi, ctx) in case()) {
        let zeros = vec![0.0; ghi.len()];
        let dec = decode_to_ghi(TargetRepresentation::DeltaCsi, &zeros, &ctx);
        prop_assert_eq!(dec.ghi, poc_forecast(&ctx));
    }

    #[test]
    fn decoded_ghi_is_never_negative(pred in proptest::collection::vec(-5.0f64..5.0, 12), (_, ctx) in case()) {
        let n = ctx.ghi_cs_horizons.len();
        for kind in TargetRepresentation::ALL {
            let d = decode_to_ghi(kind, &pred[..n], &ctx);
            prop_assert!(d.ghi.iter().all(|g| *g >= 0.0));
            prop_assert!(d.clamped <= n);
        }
    }
}

#[test]
fn out_of_range_csi_is_rejected_not_clamped() {
    let ctx = DecodeContext {
        ghi_0: 100.0,
        csi_0: 0.5,
        ghi_cs_horizons: vec![100.0, 5.0],
    };
    assert!(matches!(
        encode_target(TargetRepresentation::Csi, &[250.0, 1.0], &ctx),
        Err(EncodeError::CsiOutOfRange { horizon: 0, .. })
    ));
    assert!(matches!(
        encode_target(TargetRepresentation::DeltaCsi, &[50.0, 1.0], &ctx),
        Err(EncodeError::CsiOutOfRange { horizon: 1, .. })
    ));
    // GHI-space targets do not care about the index range
    assert!(encode_target(TargetRepresentation::Ghi, &[250.0, 1.0], &ctx).is_ok());
    assert!(matches!(
        encode_target(TargetRepresentation::Ghi, &[1.0], &ctx),
        Err(EncodeError::Length { expected: 2, actual: 1 })
    ));
}

#[test]
fn names_parse_back() {
    for kind in TargetRepresentation::ALL {
        assert_eq!(kind.name().parse::<TargetRepresentation>().unwrap(), kind);
        assert_eq!(kind.to_string().to_lowercase().parse::<TargetRepresentation>().unwrap(), kind);
    }
}
