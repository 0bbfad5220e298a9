//! On-disk task file format (a superset of the Super-NaturalInstructions
//! layout). Unknown top-level fields are carried through untouched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CorpusError, Example, Instance, Languages, TaskRecord};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub(crate) enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }

    fn into_text(self) -> String {
        match self {
            OneOrMany::One(s) => s,
            OneOrMany::Many(v) => v.join("\n"),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawExample {
    input: Option<String>,
    output: Option<OneOrMany>,
    #[serde(default)]
    explanation: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawInstance {
    id: Option<String>,
    input: Option<String>,
    output: Option<OneOrMany>,
}

#[derive(Debug, Deserialize)]
struct RawTask {
    id: Option<String>,
    name: Option<String>,
    #[serde(rename = "Source")]
    source: Option<OneOrMany>,
    #[serde(rename = "Categories")]
    categories: Option<OneOrMany>,
    #[serde(rename = "Domains")]
    domains: Option<OneOrMany>,
    #[serde(rename = "Input_language")]
    input_language: Option<OneOrMany>,
    #[serde(rename = "Output_language")]
    output_language: Option<OneOrMany>,
    #[serde(rename = "Instruction_language")]
    instruction_language: Option<OneOrMany>,
    #[serde(rename = "Definition")]
    definition: Option<OneOrMany>,
    #[serde(rename = "Positive Examples")]
    positive_examples: Option<Vec<RawExample>>,
    #[serde(rename = "Negative Examples")]
    negative_examples: Option<Vec<RawExample>>,
    #[serde(rename = "Instances")]
    instances: Option<Vec<RawInstance>>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize)]
struct ExampleOut<'a> {
    input: &'a str,
    output: &'a str,
    explanation: &'a str,
}

#[derive(Serialize)]
struct InstanceOut<'a> {
    id: &'a str,
    input: &'a str,
    output: &'a [String],
}

#[derive(Serialize)]
struct TaskOut<'a> {
    id: &'a str,
    name: &'a str,
    #[serde(rename = "Source")]
    source: &'a [String],
    #[serde(rename = "Categories")]
    categories: &'a [String],
    #[serde(rename = "Domains")]
    domains: &'a [String],
    #[serde(rename = "Input_language")]
    input_language: &'a [String],
    #[serde(rename = "Output_language")]
    output_language: &'a [String],
    #[serde(rename = "Instruction_language")]
    instruction_language: &'a [String],
    #[serde(rename = "Definition")]
    definition: [&'a str; 1],
    #[serde(rename = "Positive Examples")]
    positive_examples: Vec<ExampleOut<'a>>,
    #[serde(rename = "Negative Examples")]
    negative_examples: Vec<ExampleOut<'a>>,
    #[serde(rename = "Instances")]
    instances: Vec<InstanceOut<'a>>,
    #[serde(flatten)]
    extra: &'a BTreeMap<String, Value>,
}

fn missing(file: &str, field: &str) -> CorpusError {
    CorpusError::Schema {
        file: file.to_string(),
        field: field.to_string(),
        reason: "missing required field".to_string(),
    }
}

fn convert_example(raw: RawExample, file: &str, field: &str) -> Result<Example, CorpusError> {
    Ok(Example {
        input: raw.input.ok_or_else(|| missing(file, &format!("{field}.input")))?,
        output: raw
            .output
            .ok_or_else(|| missing(file, &format!("{field}.output")))?
            .into_text(),
        explanation: raw.explanation.unwrap_or_default(),
    })
}

/// Parses one task file. `fallback_id` (the file stem) is used when the file
/// has no `"id"` field, as in the upstream dataset layout.
pub(crate) fn parse_task(bytes: &[u8], file: &str, fallback_id: &str) -> Result<TaskRecord, CorpusError> {
    let raw: RawTask = serde_json::from_slice(bytes).map_err(|e| CorpusError::Parse {
        file: file.to_string(),
        reason: e.to_string(),
    })?;

    let task_id = raw.id.unwrap_or_else(|| fallback_id.to_string());
    let definition = raw
        .definition
        .ok_or_else(|| missing(file, "Definition"))?
        .into_text();
    let positive_examples = raw
        .positive_examples
        .ok_or_else(|| missing(file, "Positive Examples"))?
        .into_iter()
        .map(|e| convert_example(e, file, "Positive Examples"))
        .collect::<Result<Vec<_>, _>>()?;
    let negative_examples = raw
        .negative_examples
        .unwrap_or_default()
        .into_iter()
        .map(|e| convert_example(e, file, "Negative Examples"))
        .collect::<Result<Vec<_>, _>>()?;
    let instances = raw
        .instances
        .ok_or_else(|| missing(file, "Instances"))?
        .into_iter()
        .enumerate()
        .map(|(i, inst)| {
            Ok(Instance {
                instance_id: inst.id.unwrap_or_else(|| format!("{task_id}-{i}")),
                input: inst.input.ok_or_else(|| missing(file, "Instances.input"))?,
                outputs: inst
                    .output
                    .ok_or_else(|| missing(file, "Instances.output"))?
                    .into_vec(),
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;

    let vec_of = |v: Option<OneOrMany>| v.map(OneOrMany::into_vec).unwrap_or_default();
    Ok(TaskRecord {
        name: raw.name.unwrap_or_else(|| task_id.clone()),
        task_id,
        sources: vec_of(raw.source),
        categories: vec_of(raw.categories),
        domains: vec_of(raw.domains),
        languages: Languages {
            input: vec_of(raw.input_language),
            output: vec_of(raw.output_language),
            instruction: vec_of(raw.instruction_language),
        },
        definition,
        positive_examples,
        negative_examples,
        instances,
        version: 0,
        extra: raw.extra,
    })
}

fn examples_out(examples: &[Example]) -> Vec<ExampleOut<'_>> {
    examples
        .iter()
        .map(|e| ExampleOut {
            input: &e.input,
            output: &e.output,
            explanation: &e.explanation,
        })
        .collect()
}

/// Canonical serialization: fixed field order, two-space indent, trailing
/// newline. Byte-stable for a given record.
pub(crate) fn serialize_task(task: &TaskRecord) -> String {
    let out = TaskOut {
        id: &task.task_id,
        name: &task.name,
        source: &task.sources,
        categories: &task.categories,
        domains: &task.domains,
        input_language: &task.languages.input,
        output_language: &task.languages.output,
        instruction_language: &task.languages.instruction,
        definition: [&task.definition],
        positive_examples: examples_out(&task.positive_examples),
        negative_examples: examples_out(&task.negative_examples),
        instances: task
            .instances
            .iter()
            .map(|i| InstanceOut {
                id: &i.instance_id,
                input: &i.input,
                output: &i.outputs,
            })
            .collect(),
        extra: &task.extra,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("task serialization is infallible");
    s.push('\n');
    s
}
