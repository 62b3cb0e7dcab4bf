use proptest::prelude::*;

use memprobe_core::corpus::{parse_rendered, render_record};
use memprobe_core::{Graph, Record, Tensor, Tokenizer};

/// Strings over the tokenizer alphabet (printable ASCII + newline).
fn alphabet_string() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![9 => (0x20u8..=0x7e).prop_map(char::from), 1 => Just('\n')],
        0..200,
    )
    .prop_map(|chars| chars.into_iter().collect())
}

/// Nonempty attribute values without newlines.
fn attr_value() -> impl Strategy<Value = String> {
    proptest::collection::vec((0x20u8..=0x7e).prop_map(char::from), 1..40)
        .prop_map(|chars| chars.into_iter().collect())
}

proptest! {
    #[test]
    fn tokenize_round_trips_and_preserves_length(s in alphabet_string()) {
        let tok = Tokenizer::default_charset();
        let ids = tok.encode(&s).unwrap();
        prop_assert_eq!(ids.len(), s.chars().count());
        prop_assert!(ids.iter().all(|&id| (id as usize) < tok.vocab_size()));
        prop_assert_eq!(tok.decode(&ids).unwrap(), s);
    }

    #[test]
    fn softmax_rows_sum_to_one_in_unit_interval(
        rows in 1usize..4,
        cols in 1usize..8,
        scale in 0.1f64..100.0,
        raw in proptest::collection::vec(-1.0f64..1.0, 1..32)
    ) {
        let n = rows * cols;
        let data: Vec<f64> = (0..n).map(|i| raw[i % raw.len()] * scale).collect();
        let mut g = Graph::new();
        let x = g.constant_vec(&[rows, cols], data);
        let s = g.softmax_rows(x);
        let out = g.value(s);
        for r in 0..rows {
            let row = &out[r * cols..(r + 1) * cols];
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "row sum {total}");
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn render_parse_round_trips(
        date in attr_value(),
        sender in attr_value(),
        recipient in attr_value(),
        content in attr_value()
    ) {
        let record = Record::new(
            0,
            vec![
                ("Date".to_string(), date),
                ("Sender".to_string(), sender),
                ("Recipient".to_string(), recipient),
                ("Content".to_string(), content),
            ],
        )
        .unwrap();
        let text = render_record(&record).unwrap();
        prop_assert_eq!(parse_rendered(&text).unwrap(), record.attrs);
    }

    #[test]
    fn tensor_grad_accumulation_is_additive(
        data in proptest::collection::vec(-10.0f64..10.0, 4),
        g1 in proptest::collection::vec(-10.0f64..10.0, 4),
        g2 in proptest::collection::vec(-10.0f64..10.0, 4)
    ) {
        let mut t = Tensor::from_vec(&[4], data).unwrap();
        t.accumulate_grad(&g1).unwrap();
        t.accumulate_grad(&g2).unwrap();
        let got = t.grad().unwrap();
        for i in 0..4 {
            prop_assert!((got[i] - (g1[i] + g2[i])).abs() < 1e-12);
        }
    }
}
