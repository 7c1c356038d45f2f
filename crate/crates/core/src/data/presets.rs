//! Built-in ingestion configs for the four benchmark datasets, reading the
//! raw files as distributed by UCI and ProPublica.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ingest::{
    CsvFormat, FilterOp, IngestConfig, MissingPolicy, RowFilter, SplitSpec, ValueSet,
};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Adult,
    Compas,
    Communities,
    German,
}

const GERMAN_COLUMNS: [&str; 21] = [
    "checking_status",
    "duration",
    "credit_history",
    "purpose",
    "credit_amount",
    "savings",
    "employment",
    "installment_rate",
    "personal_status_sex",
    "other_debtors",
    "residence_since",
    "property",
    "age",
    "other_installment_plans",
    "housing",
    "existing_credits",
    "job",
    "people_liable",
    "telephone",
    "foreign_worker",
    "class",
];

const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

pub(crate) const COMMUNITIES_COLUMNS: [&str; 128] = [
    "state", "county", "community", "communityname", "fold", "population", "householdsize",
    "racepctblack", "racePctWhite", "racePctAsian", "racePctHisp", "agePct12t21", "agePct12t29",
    "agePct16t24", "agePct65up", "numbUrban", "pctUrban", "medIncome", "pctWWage",
    "pctWFarmSelf", "pctWInvInc", "pctWSocSec", "pctWPubAsst", "pctWRetire", "medFamInc",
    "perCapInc", "whitePerCap", "blackPerCap", "indianPerCap", "AsianPerCap", "OtherPerCap",
    "HispPerCap", "NumUnderPov", "PctPopUnderPov", "PctLess9thGrade", "PctNotHSGrad",
    "PctBSorMore", "PctUnemployed", "PctEmploy", "PctEmplManu", "PctEmplProfServ",
    "PctOccupManu", "PctOccupMgmtProf", "MalePctDivorce", "MalePctNevMarr", "FemalePctDiv",
    "TotalPctDiv", "PersPerFam", "PctFam2Par", "PctKids2Par", "PctYoungKids2Par",
    "PctTeen2Par", "PctWorkMomYoungKids", "PctWorkMom", "NumIlleg", "PctIlleg", "NumImmig",
    "PctImmigRecent", "PctImmigRec5", "PctImmigRec8", "PctImmigRec10", "PctRecentImmig",
    "PctRecImmig5", "PctRecImmig8", "PctRecImmig10", "PctSpeakEnglOnly",
    "PctNotSpeakEnglWell", "PctLargHouseFam", "PctLargHouseOccup", "PersPerOccupHous",
    "PersPerOwnOccHous", "PersPerRentOccHous", "PctPersOwnOccup", "PctPersDenseHous",
    "PctHousLess3BR", "MedNumBR", "HousVacant", "PctHousOccup", "PctHousOwnOcc",
    "PctVacantBoarded", "PctVacMore6Mos", "MedYrHousBuilt", "PctHousNoPhone",
    "PctWOFullPlumb", "OwnOccLowQuart", "OwnOccMedVal", "OwnOccHiQuart", "RentLowQ",
    "RentMedian", "RentHighQ", "MedRent", "MedRentPctHousInc", "MedOwnCostPctInc",
    "MedOwnCostPctIncNoMtg", "NumInShelters", "NumStreet", "PctForeignBorn",
    "PctBornSameState", "PctSameHouse85", "PctSameCity85", "PctSameState85", "LemasSwornFT",
    "LemasSwFTPerPop", "LemasSwFTFieldOps", "LemasSwFTFieldPerPop", "LemasTotalReq",
    "LemasTotReqPerPop", "PolicReqPerOffic", "PolicPerPop", "RacialMatchCommPol",
    "PctPolicWhite", "PctPolicBlack", "PctPolicHisp", "PctPolicAsian", "PctPolicMinor",
    "OfficAssgnDrugUnits", "NumKindsDrugsSeiz", "PolicAveOTWorked", "LandArea", "PopDens",
    "PctUsePubTrans", "PolicCars", "PolicOperBudg", "LemasPctPolicOnPatr",
    "LemasGangUnitDeploy", "LemasPctOfficDrugUn", "PolicBudgPerPop", "ViolentCrimesPerPop",
];

fn names(cols: &[&str]) -> Option<Vec<String>> {
    Some(cols.iter().map(|c| c.to_string()).collect())
}

impl DatasetId {
    pub const ALL: [DatasetId; 4] = [
        DatasetId::Adult,
        DatasetId::Compas,
        DatasetId::Communities,
        DatasetId::German,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Adult => "adult",
            DatasetId::Compas => "compas",
            DatasetId::Communities => "communities",
            DatasetId::German => "german",
        }
    }

    /// Raw file name expected inside the data directory.
    pub fn main_file(self) -> &'static str {
        match self {
            DatasetId::Adult => "adult.data",
            DatasetId::Compas => "compas-scores-two-years.csv",
            DatasetId::Communities => "communities.data",
            DatasetId::German => "german.data",
        }
    }

    /// Total L2 strength used for logistic regression on this dataset.
    pub fn l2_total(self) -> f64 {
        match self {
            DatasetId::Adult => 2.26,
            DatasetId::Compas => 37.00,
            DatasetId::Communities => 25.79,
            DatasetId::German => 5.85,
        }
    }

    pub fn config(self) -> IngestConfig {
        let mut cfg = match self {
            DatasetId::German => {
                let mut c = IngestConfig::new("class", "age");
                c.positive_label = Some(ValueSet::one("1"));
                c.sensitive_threshold = Some(30.0);
                c.format = CsvFormat {
                    delimiter: ' ',
                    has_header: false,
                    column_names: names(&GERMAN_COLUMNS),
                    ..CsvFormat::default()
                };
                c
            }
            DatasetId::Adult => {
                let mut c = IngestConfig::new("income", "sex");
                c.positive_label = Some(ValueSet(vec![">50K".into(), ">50K.".into()]));
                c.sensitive_value = Some(ValueSet::one("Male"));
                c.format = CsvFormat {
                    has_header: false,
                    column_names: names(&ADULT_COLUMNS),
                    comment: Some('|'),
                    ..CsvFormat::default()
                };
                c.split = SplitSpec::Predefined {
                    test_file: "adult.test".into(),
                    val_fraction: 0.25,
                };
                c
            }
            DatasetId::Compas => {
                let mut c = IngestConfig::new("two_year_recid", "race");
                // Positive outcome: no recidivism within two years.
                c.positive_label = Some(ValueSet::one("0"));
                c.sensitive_value = Some(ValueSet::one("Caucasian"));
                c.features = Some(
                    [
                        "sex",
                        "age",
                        "age_cat",
                        "juv_fel_count",
                        "juv_misd_count",
                        "juv_other_count",
                        "priors_count",
                        "c_charge_degree",
                        "c_charge_desc",
                    ]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                );
                let f = |column: &str, op, value: &str| RowFilter {
                    column: column.into(),
                    op,
                    value: ValueSet::one(value),
                };
                c.filters = vec![
                    f("days_b_screening_arrest", FilterOp::Le, "30"),
                    f("days_b_screening_arrest", FilterOp::Ge, "-30"),
                    f("is_recid", FilterOp::Ne, "-1"),
                    f("c_charge_degree", FilterOp::Ne, "O"),
                    f("score_text", FilterOp::Ne, "N/A"),
                ];
                c
            }
            DatasetId::Communities => {
                let mut c = IngestConfig::new("ViolentCrimesPerPop", "racepctblack");
                // Positive outcome: normalized violent-crime rate at most 0.3.
                c.label_threshold = Some(0.3);
                c.label_positive_below = true;
                c.sensitive_threshold = Some(0.06);
                c.exclude = ["state", "county", "community", "communityname", "fold"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                c.missing = MissingPolicy::DropColumns;
                c.format = CsvFormat {
                    has_header: false,
                    column_names: names(&COMMUNITIES_COLUMNS),
                    ..CsvFormat::default()
                };
                c
            }
        };
        cfg.name = Some(self.name().into());
        cfg.suggested_l2 = Some(self.l2_total());
        cfg
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adult" => Ok(DatasetId::Adult),
            "compas" => Ok(DatasetId::Compas),
            "communities" | "crime" | "communities_crime" => Ok(DatasetId::Communities),
            "german" | "german_credit" => Ok(DatasetId::German),
            other => Err(Error::Config(format!("unknown dataset '{other}'"))),
        }
    }
}

impl std::fmt::Display for DatasetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn column_lists_are_unique_and_cover_config_columns() {
        for id in DatasetId::ALL {
            let cfg = id.config();
            let Some(cols) = cfg.format.column_names.clone() else {
                assert_eq!(id, DatasetId::Compas, "only compas ships a header");
                continue;
            };
            let set: HashSet<&String> = cols.iter().collect();
            assert_eq!(set.len(), cols.len(), "{id}");
            assert!(cols.contains(&cfg.label_column), "{id}");
            assert!(cols.contains(&cfg.sensitive_column), "{id}");
            for c in &cfg.exclude {
                assert!(cols.contains(c), "{id}: {c}");
            }
        }
        assert_eq!(COMMUNITIES_COLUMNS.len(), 128);
        assert_eq!(COMMUNITIES_COLUMNS[127], "ViolentCrimesPerPop");
    }

    #[test]
    fn parses_names_and_aliases() {
        for id in DatasetId::ALL {
            assert_eq!(id.name().parse::<DatasetId>().unwrap(), id);
            assert_eq!(id.config().suggested_l2, Some(id.l2_total()));
        }
        assert_eq!("German_Credit".parse::<DatasetId>().unwrap(), DatasetId::German);
        assert!("mnist".parse::<DatasetId>().is_err());
    }
}
