use proptest::prelude::*;
use tabletop::catalog::{token_cosine, AssetRecord, Catalog};
use tabletop::shape::Primitive;

const WORDS: [&str; 10] = [
    "red", "mug", "cup", "ceramic", "plate", "small", "book", "blue", "lamp", "desk",
];

fn description() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..5).prop_map(|w| w.join(" "))
}

fn catalog() -> impl Strategy<Value = Catalog> {
    prop::collection::vec(description(), 1..8).prop_map(|ds| {
        Catalog::from_records(ds.iter().enumerate().map(|(i, d)| {
            AssetRecord::primitive(&format!("asset_{i}"), Primitive::Sphere { radius: 0.05 })
                .with_description(d)
        }))
        .unwrap()
    })
}

proptest! {
    #[test]
    fn own_description_retrieves_a_best_match(cat in catalog()) {
        for r in cat.records() {
            let got = cat.retrieve(&r.description, 0.0).unwrap();
            let s = token_cosine(&r.description, &got.description);
            for other in cat.records() {
                prop_assert!(s >= token_cosine(&r.description, &other.description));
            }
        }
    }

    #[test]
    fn retrieval_is_deterministic(cat in catalog(), query in description()) {
        let a = cat.retrieve(&query, 0.0).map(|r| r.id.clone()).ok();
        let b = cat.retrieve(&query, 0.0).map(|r| r.id.clone()).ok();
        prop_assert_eq!(a, b);
    }
}
