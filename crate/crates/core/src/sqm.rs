//! Quality model: characteristics grouping named sub-characteristics.
//!
//! Sub-characteristic ids are lowercase, globally unique, and free of tabs
//! and newlines so they can round-trip through the TSV interchange format.
//! The bundled default model ships as data; [`default_quality_model`]
//! rebuilds it on demand.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subcharacteristic {
    pub id: String,
    pub definition: String,
}

#[derive(Clone, Debug, Eq)]
pub struct Characteristic {
    pub name: String,
    pub definition: String,
    pub subcharacteristics: Vec<Subcharacteristic>,
}

/// Equality is structural: the interchange format carries characteristic
/// names and sub-characteristic rows but no characteristic prose, so the
/// `definition` field is display metadata and excluded from identity.
impl PartialEq for Characteristic {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.subcharacteristics == other.subcharacteristics
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct QualityModel {
    pub characteristics: Vec<Characteristic>,
}

impl QualityModel {
    pub fn subcharacteristic_count(&self) -> usize {
        self.characteristics
            .iter()
            .map(|c| c.subcharacteristics.len())
            .sum()
    }

    /// All sub-characteristic ids in model order.
    pub fn subcharacteristic_ids(&self) -> Vec<&str> {
        self.characteristics
            .iter()
            .flat_map(|c| c.subcharacteristics.iter().map(|s| s.id.as_str()))
            .collect()
    }

    pub fn contains_subcharacteristic(&self, id: &str) -> bool {
        self.characteristics
            .iter()
            .any(|c| c.subcharacteristics.iter().any(|s| s.id == id))
    }
}

pub const MODEL_HEADER: &str = "characteristic\tsubcharacteristic\tdefinition";

fn validate_id(id: &str, line: usize) -> Result<()> {
    if id.is_empty() {
        return Err(Error::validation(format!(
            "line {line}: empty sub-characteristic id"
        )));
    }
    if id.contains('\t') || id.contains('\n') {
        return Err(Error::validation(format!(
            "sub-characteristic id {id:?} contains a tab or newline"
        )));
    }
    if id.chars().any(|c| c.is_uppercase()) {
        return Err(Error::validation(format!(
            "sub-characteristic id {id:?} must be lowercase"
        )));
    }
    Ok(())
}

/// Parses a quality model from its TSV interchange form.
///
/// Rows for the same characteristic may appear anywhere in the document;
/// they are grouped by name in order of first appearance. Loaded models
/// carry empty characteristic definitions (the format does not store them).
pub fn load_quality_model(doc: &str) -> Result<QualityModel> {
    let mut lines = doc.lines();
    match lines.next() {
        Some(h) if h == MODEL_HEADER => {}
        Some(h) => {
            return Err(Error::parse(
                1,
                format!("expected header {MODEL_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::parse(1, "empty document")),
    }

    let mut model = QualityModel::default();
    let mut seen_ids: std::collections::BTreeSet<String> = Default::default();
    for (idx, row) in lines.enumerate() {
        let line = idx + 2;
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (characteristic, id, definition) = (fields[0], fields[1], fields[2]);
        if characteristic.is_empty() {
            return Err(Error::validation(format!(
                "line {line}: empty characteristic name"
            )));
        }
        validate_id(id, line)?;
        if !seen_ids.insert(id.to_string()) {
            return Err(Error::validation(format!(
                "duplicate sub-characteristic id {id:?}"
            )));
        }
        let subchar = Subcharacteristic {
            id: id.to_string(),
            definition: definition.to_string(),
        };
        match model
            .characteristics
            .iter_mut()
            .find(|c| c.name == characteristic)
        {
            Some(c) => c.subcharacteristics.push(subchar),
            None => model.characteristics.push(Characteristic {
                name: characteristic.to_string(),
                definition: String::new(),
                subcharacteristics: vec![subchar],
            }),
        }
    }
    Ok(model)
}

/// Serializes a model to its TSV interchange form, one row per
/// sub-characteristic, characteristics in model order.
pub fn serialize_quality_model(model: &QualityModel) -> String {
    let mut out = String::from(MODEL_HEADER);
    out.push('\n');
    for c in &model.characteristics {
        for s in &c.subcharacteristics {
            out.push_str(&c.name);
            out.push('\t');
            out.push_str(&s.id);
            out.push('\t');
            out.push_str(&s.definition);
            out.push('\n');
        }
    }
    out
}

type ModelRow = (
    &'static str,
    &'static str,
    &'static [(&'static str, &'static str)],
);

const DEFAULT_MODEL: &[ModelRow] = &[
    (
        "Utility",
        "The degree to which a machine learning system provides functions that meet stated and implied needs when used under specified conditions.",
        &[
            ("accuracy", "The size of the observational error (systematic and random) of an ML system."),
            ("effectiveness", "The ability of an ML system to produce a desired result on the business task it is being used for."),
            ("responsiveness", "The ability of an ML system to complete the desired task in an acceptable time frame."),
            ("reusability", "The ability to reuse the same ML system without any change, for another business case."),
        ],
    ),
    (
        "Economy",
        "The level of performance relative to the amount of resources used under stated conditions.",
        &[
            ("cost-effectiveness", "The extent to which an ML System achieves the desired relationship between costs and overall impact."),
            ("efficiency", "The ability to avoid wasting resources (computational, human, financial, etc.) in order to perform the desired task effectively."),
        ],
    ),
    (
        "Robustness",
        "The tolerance to degradation by the machine learning system under consideration when exposed to dynamic or adverse events.",
        &[
            ("availability", "The probability that the system will be up and running and able to deliver useful services to users."),
            ("resilience", "The extent to which an ML system can provide and maintain an acceptable level of service in the face of technical challenges to normal operation."),
            ("adaptability", "The extent to which an ML system can adapt to changes in the production environment, always providing the same functioning level."),
            ("scalability", "The extent of an ML system to handle a growing amount of work by adding resources to the system."),
        ],
    ),
    (
        "Modifiability",
        "The degree of effectiveness and efficiency with which a machine learning system can be modified to improve it, correct it or adapt it to changes in environment and in requirements.",
        &[
            ("extensibility", "The ease with which a system can be modified, in order to be used for another purpose."),
            ("maintainability", "The ease with which activities aiming at keeping an ML system functional in the desired regime, can be performed."),
            ("modularity", "The extent to which an ML system consists of components of limited functionality that interrelate with each other."),
            ("testability", "The extent with which an ML system can be tested against expected behaviours."),
        ],
    ),
    (
        "Productionizability",
        "The ease of performing the actions required for a machine learning system to run successfully in production.",
        &[
            ("deployability", "The extent to which an ML system can be deployed in production when needed."),
            ("repeatability", "The ease with which the ML lifecycle can be repeated."),
            ("operability", "The extent to which an ML system can be controlled (disable, revert, upload new version, etc.)."),
            ("monitoring", "The extent to which relevant indicators of an ML system are effectively observed and integrated in the operation of the system."),
        ],
    ),
    (
        "Comprehensibility",
        "The degree to which users and contributors understand the relevant aspects of a machine learning system.",
        &[
            ("discoverability", "The extent to which an ML system can be found (by means of performing a search in a database or any other information retrieval system)."),
            ("readability", "The ease with which the code of an ML system can be understood."),
            ("traceability", "The ability to relate artifacts created during the development of an ML system to how they were generated."),
            ("understandability", "The ease with which the implementation and design choices of an ML system can be understood."),
            ("usability", "The extent to which an ML system can be effectively used by users."),
            ("debuggability", "The extent to which the inner workings of the ML system can be analyzed in order to understand why it behaves the way it does."),
        ],
    ),
    (
        "Responsibility",
        "The level of trustworthiness of a machine learning system.",
        &[
            ("explainability", "The ability to explain the output of an ML system."),
            ("fairness", "The extent to which an ML system prevents unjust predictions towards protected attributes (race, gender, income, etc)."),
            ("ownership", "The extent to which there exists people appointed to maintaining the ML System and supporting all the relevant stakeholders."),
            ("standards compliance", "The extent to which applicable standards are followed in the ML system."),
            ("vulnerability", "The ease with which the system can be (ab)used to achieve malicious purposes."),
        ],
    ),
];

/// The bundled default quality model.
pub fn default_quality_model() -> QualityModel {
    QualityModel {
        characteristics: DEFAULT_MODEL
            .iter()
            .map(|(name, definition, subchars)| Characteristic {
                name: (*name).to_string(),
                definition: (*definition).to_string(),
                subcharacteristics: subchars
                    .iter()
                    .map(|(id, def)| Subcharacteristic {
                        id: (*id).to_string(),
                        definition: (*def).to_string(),
                    })
                    .collect(),
            })
            .collect(),
    }
}
