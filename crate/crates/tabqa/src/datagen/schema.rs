//! Field specifications and token pools for the synthetic corpus.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GenError;
use crate::table::{FieldKind, FieldName};

/// Inclusive integer range for a numeric column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericField {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

/// Entity column backed by a pool of distinct single tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityField {
    pub name: String,
    pub pool: Vec<String>,
}

/// The full generation schema: typed fields plus their value sources.
/// Query templates live in [`super::templates`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub numeric_fields: Vec<NumericField>,
    pub entity_fields: Vec<EntityField>,
}

impl Schema {
    /// Column order: numeric fields first, then entity fields.
    pub fn field_names(&self) -> Vec<FieldName> {
        self.numeric_fields
            .iter()
            .map(|f| FieldName { name: f.name.clone(), kind: FieldKind::Numeric })
            .chain(self.entity_fields.iter().map(|f| FieldName {
                name: f.name.clone(),
                kind: FieldKind::Entity,
            }))
            .collect()
    }

    pub fn n_fields(&self) -> usize {
        self.numeric_fields.len() + self.entity_fields.len()
    }

    pub fn n_numeric(&self) -> usize {
        self.numeric_fields.len()
    }

    /// Hex SHA-256 of the canonical JSON encoding, recorded in manifests.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serialization cannot fail");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks pool sizes and range widths against a table of `rows` rows.
    pub fn validate(&self, rows: usize) -> Result<(), GenError> {
        if self.numeric_fields.is_empty() {
            return Err(GenError::InvalidConfig(
                "schema needs at least one numeric field for superlatives".into(),
            ));
        }
        if self.n_fields() < 2 {
            return Err(GenError::InvalidConfig(
                "schema needs at least two fields (where key and answer)".into(),
            ));
        }
        for f in &self.numeric_fields {
            let span = f.hi - f.lo + 1;
            if span < rows as i64 {
                return Err(GenError::PoolExhausted(f.name.clone()));
            }
        }
        for f in &self.entity_fields {
            if f.pool.len() < rows {
                return Err(GenError::PoolExhausted(f.name.clone()));
            }
            let mut sorted: Vec<&String> = f.pool.iter().collect();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != f.pool.len() {
                return Err(GenError::InvalidConfig(format!(
                    "entity pool for `{}` contains duplicates",
                    f.name
                )));
            }
            if f.pool.iter().any(|t| t.chars().any(char::is_whitespace)) {
                return Err(GenError::InvalidConfig(format!(
                    "entity pool for `{}` contains multi-word tokens",
                    f.name
                )));
            }
        }
        Ok(())
    }
}

impl Default for Schema {
    fn default() -> Self {
        let pool = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Schema {
            // Disjoint ranges keep every number token unambiguous about its column.
            numeric_fields: vec![
                NumericField { name: "year".into(), lo: 1950, hi: 2049 },
                NumericField { name: "area".into(), lo: 100, hi: 299 },
                NumericField { name: "gdp".into(), lo: 300, hi: 499 },
                NumericField { name: "audience".into(), lo: 500, hi: 699 },
            ],
            entity_fields: vec![
                EntityField {
                    name: "city".into(),
                    pool: pool(&[
                        "sydney", "athens", "beijing", "london", "rio", "tokyo", "paris",
                        "moscow", "seoul", "barcelona", "atlanta", "montreal", "munich",
                        "rome", "helsinki", "oslo", "amsterdam", "berlin", "vienna",
                        "prague", "madrid", "lisbon", "dublin", "cairo", "nairobi",
                        "lagos", "toronto", "chicago", "boston", "denver", "dallas",
                        "houston", "phoenix", "seattle", "miami", "detroit", "vancouver",
                        "calgary", "brisbane", "perth", "auckland", "osaka", "nagoya",
                        "mumbai", "delhi", "bangkok", "hanoi", "manila",
                    ]),
                },
                EntityField {
                    name: "country".into(),
                    pool: pool(&[
                        "australia", "greece", "china", "britain", "brazil", "japan",
                        "france", "russia", "korea", "spain", "canada", "germany",
                        "italy", "finland", "norway", "netherlands", "austria",
                        "czechia", "hungary", "poland", "portugal", "ireland", "egypt",
                        "kenya", "nigeria", "mexico", "chile", "peru", "argentina",
                        "colombia", "uruguay", "bolivia", "ecuador", "venezuela",
                        "india", "thailand", "vietnam", "philippines", "malaysia",
                        "singapore", "indonesia", "turkey", "sweden", "denmark",
                        "belgium", "switzerland", "morocco", "ghana",
                    ]),
                },
                EntityField {
                    name: "host".into(),
                    pool: pool(&[
                        "olivia", "liam", "emma", "noah", "ava", "mia", "lucas",
                        "ethan", "sofia", "isabella", "jackson", "aiden", "chloe",
                        "grace", "harper", "elijah", "daniel", "henry", "sebastian",
                        "leo", "stella", "hazel", "violet", "aurora", "ivy", "ruby",
                        "naomi", "caleb", "owen", "ezra", "miles", "asher", "silas",
                        "jude", "felix", "rowan", "finn", "sage", "blair", "quinn",
                        "reese", "parker", "peyton", "avery", "logan", "morgan",
                        "riley", "skylar",
                    ]),
                },
                EntityField {
                    name: "sport".into(),
                    pool: pool(&[
                        "archery", "badminton", "baseball", "basketball", "boxing",
                        "canoeing", "cycling", "diving", "equestrian", "fencing",
                        "football", "golf", "gymnastics", "handball", "hockey", "judo",
                        "karate", "rowing", "rugby", "sailing", "shooting",
                        "skateboarding", "skiing", "snowboarding", "soccer", "softball",
                        "squash", "surfing", "swimming", "taekwondo", "tennis",
                        "triathlon", "volleyball", "weightlifting", "wrestling",
                        "biathlon", "bobsled", "curling", "luge", "skeleton",
                        "marathon", "pentathlon", "polo", "cricket", "lacrosse",
                        "netball", "racquetball", "trampoline",
                    ]),
                },
                EntityField {
                    name: "mascot".into(),
                    pool: pool(&[
                        "falcon", "tiger", "panda", "wolf", "eagle", "bear", "lion",
                        "fox", "otter", "lynx", "puma", "jaguar", "cobra", "viper",
                        "raven", "crane", "heron", "ibis", "kiwi", "koala", "wombat",
                        "dingo", "bison", "moose", "elk", "hare", "badger", "weasel",
                        "marten", "stoat", "seal", "walrus", "dolphin", "orca",
                        "shark", "manta", "osprey", "kestrel", "merlin", "condor",
                        "pelican", "toucan", "macaw", "gecko", "iguana", "newt",
                        "gibbon", "lemur",
                    ]),
                },
                EntityField {
                    name: "sponsor".into(),
                    pool: pool(&[
                        "novatek", "sunbeam", "maplewood", "ironpeak", "bluewave",
                        "starfield", "greenbridge", "silverline", "redstone",
                        "goldcrest", "clearwater", "brightpath", "stonegate",
                        "rivermark", "hillcroft", "oakfield", "pinewood", "cedarline",
                        "birchford", "elmworth", "ashgrove", "willowmere", "hazelton",
                        "rowanberry", "thornfield", "fernwood", "mossbank",
                        "heatherby", "cliffside", "seacrest", "baymont", "lakeshore",
                        "brookfield", "meadowlark", "fieldstone", "summitview",
                        "ridgeline", "canyonview", "valleybrook", "glenhaven",
                        "marshfield", "dunewood", "frostpine", "embercrest",
                        "galeharbor", "driftwood", "shorewind", "tidemark",
                    ]),
                },
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_is_valid() {
        let s = Schema::default();
        s.validate(10).unwrap();
        assert_eq!(s.n_fields(), 10);
        assert_eq!(s.n_numeric(), 4);
        for f in &s.entity_fields {
            assert!(f.pool.len() >= 40, "pool for {} has {}", f.name, f.pool.len());
        }
    }

    #[test]
    fn entity_pools_are_pairwise_disjoint() {
        let s = Schema::default();
        let mut all: Vec<&String> = s.entity_fields.iter().flat_map(|f| f.pool.iter()).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n, "entity pools share tokens");
    }

    #[test]
    fn numeric_ranges_are_pairwise_disjoint() {
        let s = Schema::default();
        for (i, a) in s.numeric_fields.iter().enumerate() {
            for b in &s.numeric_fields[i + 1..] {
                assert!(a.hi < b.lo || b.hi < a.lo, "{} overlaps {}", a.name, b.name);
            }
        }
    }

    #[test]
    fn schema_hash_is_stable_across_calls() {
        let s = Schema::default();
        assert_eq!(s.content_hash(), s.content_hash());
        assert_eq!(s.content_hash().len(), 64);
    }

    #[test]
    fn undersized_pool_rejected() {
        let s = Schema {
            numeric_fields: vec![NumericField { name: "n".into(), lo: 0, hi: 100 }],
            entity_fields: vec![EntityField {
                name: "e".into(),
                pool: vec!["a".into(), "b".into()],
            }],
        };
        assert!(s.validate(10).is_err());
    }
}
