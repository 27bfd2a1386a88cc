//! Tool specs, registry, and shallow input validation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolError {
    #[error("invalid tool spec: {0}")]
    InvalidSpec(String),
    #[error("tool {0:?} is already registered")]
    DuplicateToolName(String),
    #[error("unknown tool: {0}")]
    NotFound(String),
    #[error("tool {tool:?}: property {property:?}: {message}")]
    SchemaViolation { tool: String, property: String, message: String },
    #[error("tool {tool:?} failed: {message}")]
    Handler { tool: String, message: String },
}

/// Primitive JSON types the shallow schema can require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Object,
    Array,
}

impl ParamType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Integer => "integer",
            ParamType::Number => "number",
            ParamType::Boolean => "boolean",
            ParamType::Object => "object",
            ParamType::Array => "array",
        }
    }

    fn matches(&self, value: &Value) -> bool {
        match self {
            ParamType::String => value.is_string(),
            ParamType::Integer => value.as_i64().is_some() || value.as_u64().is_some(),
            ParamType::Number => value.is_number(),
            ParamType::Boolean => value.is_boolean(),
            ParamType::Object => value.is_object(),
            ParamType::Array => value.is_array(),
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shallow parameter schema: property names with primitive types, plus the
/// required subset. Validation checks presence and top-level type, nothing
/// deeper; rich schema languages are out of scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSchema {
    pub properties: BTreeMap<String, ParamType>,
    #[serde(default)]
    pub required: Vec<String>,
}

impl ParameterSchema {
    pub fn new<P, R, K, Q>(properties: P, required: R) -> Result<Self, ToolError>
    where
        P: IntoIterator<Item = (K, ParamType)>,
        R: IntoIterator<Item = Q>,
        K: Into<String>,
        Q: Into<String>,
    {
        let schema = ParameterSchema {
            properties: properties.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            required: required.into_iter().map(Into::into).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn empty() -> Self {
        ParameterSchema { properties: BTreeMap::new(), required: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), ToolError> {
        for key in &self.required {
            if !self.properties.contains_key(key) {
                return Err(ToolError::InvalidSpec(format!(
                    "required property {key:?} is not declared in properties"
                )));
            }
        }
        Ok(())
    }
}

fn valid_tool_name(name: &str) -> bool {
    let mut bytes = name.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_lowercase() => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// What the model sees about a tool: identifier, human description, and
/// the shallow input schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    name: String,
    description: String,
    parameter_schema: ParameterSchema,
}

impl ToolSpec {
    /// `name` must be lowercase snake case (`[a-z][a-z0-9_]*`).
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        parameter_schema: ParameterSchema,
    ) -> Result<Self, ToolError> {
        let name = name.into();
        if !valid_tool_name(&name) {
            return Err(ToolError::InvalidSpec(format!(
                "tool name must be lowercase snake case, got {name:?}"
            )));
        }
        parameter_schema.validate()?;
        Ok(ToolSpec { name, description: description.into(), parameter_schema })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn parameter_schema(&self) -> &ParameterSchema {
        &self.parameter_schema
    }
}

/// Handler result: JSON output, or an error message that becomes an
/// `is_error` tool result for the model to react to.
pub type ToolHandler = Arc<dyn Fn(&Value) -> Result<Value, String> + Send + Sync>;

struct RegisteredTool {
    spec: ToolSpec,
    handler: ToolHandler,
}

/// Named tool collection with stable (lexicographic) iteration order.
#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, RegisteredTool>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec, handler: ToolHandler) -> Result<(), ToolError> {
        if self.tools.contains_key(spec.name()) {
            return Err(ToolError::DuplicateToolName(spec.name().to_string()));
        }
        self.tools.insert(spec.name().to_string(), RegisteredTool { spec, handler });
        Ok(())
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.values().map(|t| t.spec.clone()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.tools.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Validates the input against the tool's schema, then runs the
    /// handler. The failing property is named in schema errors.
    pub fn execute(&self, name: &str, input: &Value) -> Result<Value, ToolError> {
        let tool = self.tools.get(name).ok_or_else(|| ToolError::NotFound(name.to_string()))?;
        validate_input(&tool.spec, input)?;
        (tool.handler)(input)
            .map_err(|message| ToolError::Handler { tool: name.to_string(), message })
    }
}

fn validate_input(spec: &ToolSpec, input: &Value) -> Result<(), ToolError> {
    let object = input.as_object().ok_or_else(|| ToolError::SchemaViolation {
        tool: spec.name().to_string(),
        property: "<root>".to_string(),
        message: format!("input must be a JSON object, got {input}"),
    })?;
    for key in &spec.parameter_schema().required {
        if !object.contains_key(key) {
            return Err(ToolError::SchemaViolation {
                tool: spec.name().to_string(),
                property: key.clone(),
                message: "required property is missing".to_string(),
            });
        }
    }
    for (key, value) in object {
        if let Some(expected) = spec.parameter_schema().properties.get(key) {
            if !expected.matches(value) {
                return Err(ToolError::SchemaViolation {
                    tool: spec.name().to_string(),
                    property: key.clone(),
                    message: format!("expected {expected}, got {value}"),
                });
            }
        }
        // undeclared extra keys are tolerated: the model may over-specify
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn lookup_spec() -> ToolSpec {
        ToolSpec::new(
            "get_customer_information",
            "looks up a customer by phone number",
            ParameterSchema::new([("phoneNr", ParamType::String)], ["phoneNr"]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn tool_names_must_be_snake_case() {
        let schema = ParameterSchema::empty();
        assert!(ToolSpec::new("get_logs", "x", schema.clone()).is_ok());
        assert!(ToolSpec::new("getLogs", "x", schema.clone()).is_err());
        assert!(ToolSpec::new("Get_logs", "x", schema.clone()).is_err());
        assert!(ToolSpec::new("", "x", schema.clone()).is_err());
        assert!(ToolSpec::new("9lives", "x", schema).is_err());
    }

    #[test]
    fn schema_requires_declared_properties() {
        assert!(ParameterSchema::new([("a", ParamType::String)], ["b"]).is_err());
    }

    #[test]
    fn duplicate_registration_is_rejected() {
        let mut registry = ToolRegistry::new();
        let handler: ToolHandler = Arc::new(|_| Ok(json!({})));
        registry.register(lookup_spec(), handler.clone()).unwrap();
        assert!(matches!(
            registry.register(lookup_spec(), handler),
            Err(ToolError::DuplicateToolName(name)) if name == "get_customer_information"
        ));
    }

    #[test]
    fn execute_validates_and_names_failing_property() {
        let mut registry = ToolRegistry::new();
        registry
            .register(lookup_spec(), Arc::new(|input| Ok(json!({"echo": input}))))
            .unwrap();

        let err = registry.execute("get_customer_information", &json!({})).unwrap_err();
        assert!(matches!(
            &err,
            ToolError::SchemaViolation { property, .. } if property == "phoneNr"
        ));

        let err = registry
            .execute("get_customer_information", &json!({"phoneNr": 42}))
            .unwrap_err();
        assert!(matches!(
            &err,
            ToolError::SchemaViolation { property, .. } if property == "phoneNr"
        ));

        let out = registry
            .execute("get_customer_information", &json!({"phoneNr": "+555-12345", "extra": 1}))
            .unwrap();
        assert_eq!(out["echo"]["phoneNr"], "+555-12345");
    }

    #[test]
    fn unknown_tool_and_handler_errors() {
        let mut registry = ToolRegistry::new();
        registry
            .register(
                ToolSpec::new("fails", "always fails", ParameterSchema::empty()).unwrap(),
                Arc::new(|_| Err("boom".to_string())),
            )
            .unwrap();
        assert!(matches!(
            registry.execute("missing", &json!({})),
            Err(ToolError::NotFound(name)) if name == "missing"
        ));
        assert!(matches!(
            registry.execute("fails", &json!({})),
            Err(ToolError::Handler { message, .. }) if message == "boom"
        ));
    }

    #[test]
    fn specs_iterate_lexicographically() {
        let mut registry = ToolRegistry::new();
        for name in ["zeta", "alpha", "mid"] {
            registry
                .register(
                    ToolSpec::new(name, "d", ParameterSchema::empty()).unwrap(),
                    Arc::new(|_| Ok(json!({}))),
                )
                .unwrap();
        }
        assert_eq!(registry.names(), vec!["alpha", "mid", "zeta"]);
    }
}
