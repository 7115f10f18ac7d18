use dpsim::engine::{sanitize_price, score_simulation};
use dpsim::market::scientist_choice_probs;
use dpsim::stats::lambert_w;
use proptest::prelude::*;

fn revenues(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (prop::collection::vec(0.0..1e6f64, m), prop::collection::vec(prop::collection::vec(0.0..1e6f64, m), m)).prop_map(
        move |(olig, mut duo)| {
            for (j, row) in duo.iter_mut().enumerate() {
                row[j] = 0.0;
            }
            (olig, duo)
        },
    )
}

proptest! {
    #[test]
    fn shares_are_normalised((olig, duo) in (2usize..10).prop_flat_map(revenues)) {
        let card = score_simulation(&olig, &duo);
        for shares in [&card.oligopoly_share, &card.duopoly_share, &card.final_share] {
            prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(shares.iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn sanitised_prices_are_legal(raw in prop::num::f64::ANY) {
        let p = sanitize_price(raw);
        prop_assert!(p.is_finite() && p >= 0.0);
        if raw.is_finite() && raw > 0.0 {
            prop_assert_eq!(p, raw);
        }
    }

    #[test]
    fn choice_probabilities_form_a_distribution(
        prices in prop::collection::vec(0.0..200.0f64, 1..12),
        alpha in -5.0..20.0f64,
        beta in 0.0..3.0f64,
    ) {
        let q = scientist_choice_probs(&prices, alpha, beta);
        let total = q.no_purchase + q.purchase.iter().sum::<f64>();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // cheaper never loses share
        for j in 0..prices.len() {
            for k in 0..prices.len() {
                if prices[j] < prices[k] {
                    prop_assert!(q.purchase[j] >= q.purchase[k]);
                }
            }
        }
    }

    #[test]
    fn lambert_w_inverts(x in 0.0..1e300f64) {
        let w = lambert_w(x).unwrap();
        // compare in log space to stay finite for huge x
        if x > 0.0 {
            prop_assert!((w.ln() + w - x.ln()).abs() <= 1e-12 * x.ln().abs().max(1.0));
        } else {
            prop_assert_eq!(w, 0.0);
        }
    }
}
