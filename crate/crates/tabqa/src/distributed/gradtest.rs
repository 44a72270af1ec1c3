//! Full-model finite-difference checks on a toy table.

#[cfg(test)]
mod tests {
    use crate::datagen::{generate_query, generate_table, Schema};
    use crate::distributed::model::{denotation_cell, DistributedConfig, DistributedModel};
    use crate::distributed::train::sample_loss_and_grads;
    use crate::nn::finite_diff_check;
    use crate::sample::{QueryType, Sample};
    use crate::table::{CellValue, FieldName, Table};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A 4×3 toy table exercising both cell kinds.
    fn toy_sample() -> Sample {
        let schema = Schema {
            numeric_fields: vec![
                crate::datagen::schema::NumericField { name: "year".into(), lo: 1990, hi: 2030 },
                crate::datagen::schema::NumericField { name: "area".into(), lo: 100, hi: 180 },
            ],
            entity_fields: vec![crate::datagen::schema::EntityField {
                name: "city".into(),
                pool: ["ume", "oak", "ash", "fir", "elm", "yew"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let table = generate_table(&mut rng, &schema, 4).unwrap();
        let (query, gold_trace, denotation) =
            generate_query(&mut rng, &table, QueryType::SelectWhere).unwrap();
        Sample { table, query, query_type: QueryType::SelectWhere, gold_trace, denotation }
    }

    #[test]
    fn full_model_gradient_matches_finite_differences() {
        let sample = toy_sample();
        let samples = vec![sample.clone()];
        let mut model = DistributedModel::new(&samples, DistributedConfig::tiny(), 23);

        let labels = crate::distributed::train::FieldLabels::from_gold_trace(&sample, 4);
        let (_, grads) =
            sample_loss_and_grads(&model, &sample, 0.5, Some(&labels), true);
        let grads = grads.unwrap();

        let vocab = model.vocab.clone();
        let fields = model.fields.clone();
        let config = model.config.clone();
        let forward = move |store: &crate::nn::ParamStore| {
            let mut probe = DistributedModel::with_vocab(
                vocab.clone(),
                fields.clone(),
                config.clone(),
                0,
            );
            probe.store = store.clone();
            let (loss, _) = sample_loss_and_grads(&probe, &sample, 0.5, Some(&labels), false);
            loss
        };

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = finite_diff_check(&mut model.store, forward, &grads, 4, &mut rng, 1e-4);
        assert!(
            report.passed(),
            "max rel err {} at {:?} over {} coords",
            report.max_rel_err,
            report.worst,
            report.checked
        );
    }

    #[test]
    fn paper_style_table_round_trip() {
        // Keep a literal table in the gradient module so shape bugs in
        // encode_table surface on hand-built data too.
        let table = Table::new(
            vec![
                FieldName::numeric("year"),
                FieldName::entity("city"),
                FieldName::numeric("area"),
            ],
            vec![
                vec![CellValue::Number(2000), CellValue::Entity("oak".into()), CellValue::Number(120)],
                vec![CellValue::Number(2004), CellValue::Entity("elm".into()), CellValue::Number(150)],
            ],
        )
        .unwrap();
        assert!(denotation_cell(&table, &CellValue::Number(150)).unwrap() == 5);
    }
}
