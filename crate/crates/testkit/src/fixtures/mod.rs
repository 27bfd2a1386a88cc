//! Seeded sample agents for the shipped test corpus.
//!
//! Each constructor returns a fully wired [`Agent`] with deterministic
//! in-memory data parsed from the JSON files under `fixtures/`. Mutable
//! state (customer records, appointment slots, the knowledge base, the
//! key-value memory) is private to each agent instance, so two agents
//! never share or leak state across test cases.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use crate::agent::{Agent, AgentConfig, ParamType, ParameterSchema, ToolSpec};

const CUSTOMERS: &str = include_str!("../../fixtures/customers.json");
const VEHICLES: &str = include_str!("../../fixtures/vehicles.json");
const APPOINTMENTS: &str = include_str!("../../fixtures/appointments.json");
const ARCHITECTURE: &str = include_str!("../../fixtures/architecture.json");
const LOGS: &str = include_str!("../../fixtures/logs.json");
const METRICS: &str = include_str!("../../fixtures/metrics.json");
const EVENTS: &str = include_str!("../../fixtures/events.json");
const KB: &str = include_str!("../../fixtures/kb.json");

fn seed(raw: &str) -> Value {
    serde_json::from_str(raw).expect("fixture seed files are valid JSON")
}

fn spec(
    name: &str,
    description: &str,
    properties: &[(&str, ParamType)],
    required: &[&str],
) -> ToolSpec {
    ToolSpec::new(
        name,
        description,
        ParameterSchema::new(
            properties.iter().map(|(k, t)| (k.to_string(), *t)),
            required.iter().map(|s| s.to_string()),
        )
        .expect("fixture schema is valid"),
    )
    .expect("fixture spec is valid")
}

/// Names accepted by [`agent_by_name`], sorted.
pub fn agent_names() -> &'static [&'static str] {
    &["diagnostic", "driver_assistance", "events", "knowledge_base", "memory"]
}

pub fn agent_by_name(name: &str) -> Option<Agent> {
    match name {
        "diagnostic" => Some(diagnostic_agent()),
        "driver_assistance" => Some(driver_assistance_agent()),
        "events" => Some(events_agent()),
        "knowledge_base" => Some(knowledge_base_agent()),
        "memory" => Some(memory_agent()),
        _ => None,
    }
}

/// Vehicle fleet assistant: customer records, vehicle status, workshop
/// appointments. Five tools; multi-tool responses execute in parallel.
pub fn driver_assistance_agent() -> Agent {
    let customers = Arc::new(Mutex::new(seed(CUSTOMERS)));
    let vehicles = seed(VEHICLES);
    let appointments = Arc::new(Mutex::new(seed(APPOINTMENTS)));

    let mut agent = Agent::new(
        AgentConfig::new(
            "You are a driver assistance agent for a connected vehicle fleet. \
             You can look up and update customer records, read vehicle status, \
             and manage workshop appointments. Confirm every change you make.",
        )
        .with_parallel_tools(true),
    )
    .expect("fixture config is valid");

    {
        let customers = customers.clone();
        agent
            .register_tool(
                spec(
                    "get_customer_information",
                    "Looks up a customer record by phone number.",
                    &[("phoneNr", ParamType::String)],
                    &["phoneNr"],
                ),
                Arc::new(move |input| {
                    let phone = input["phoneNr"].as_str().unwrap_or_default();
                    let customers = customers.lock().unwrap();
                    let hit = customers
                        .as_array()
                        .expect("customer seed is an array")
                        .iter()
                        .find(|c| c["phoneNr"] == phone);
                    Ok(match hit {
                        Some(c) => json!({
                            "found": true,
                            "ucid": c["ucid"],
                            "name": c["name"],
                            "vin": c["vin"],
                            "phoneNr": c["phoneNr"],
                        }),
                        None => json!({ "found": false }),
                    })
                }),
            )
            .expect("fixture tools are unique");
    }

    {
        let customers = customers.clone();
        agent
            .register_tool(
                spec(
                    "update_customer_information",
                    "Updates the phone number of the customer with the given ucid.",
                    &[("ucid", ParamType::String), ("phoneNr", ParamType::String)],
                    &["ucid", "phoneNr"],
                ),
                Arc::new(move |input| {
                    let ucid = input["ucid"].as_str().unwrap_or_default();
                    let phone = input["phoneNr"].as_str().unwrap_or_default();
                    let mut customers = customers.lock().unwrap();
                    let hit = customers
                        .as_array_mut()
                        .expect("customer seed is an array")
                        .iter_mut()
                        .find(|c| c["ucid"] == ucid);
                    match hit {
                        Some(c) => {
                            c["phoneNr"] = json!(phone);
                            Ok(json!({ "updated": true, "ucid": ucid, "phoneNr": phone }))
                        }
                        None => Err(format!("no customer with ucid {ucid:?}")),
                    }
                }),
            )
            .expect("fixture tools are unique");
    }

    agent
        .register_tool(
            spec(
                "get_vehicle_status",
                "Reads the last reported status of the vehicle with the given vin.",
                &[("vin", ParamType::String)],
                &["vin"],
            ),
            Arc::new(move |input| {
                let vin = input["vin"].as_str().unwrap_or_default();
                Ok(match vehicles.get(vin) {
                    Some(status) => json!({ "found": true, "status": status }),
                    None => json!({ "found": false }),
                })
            }),
        )
        .expect("fixture tools are unique");

    {
        let appointments = appointments.clone();
        agent
            .register_tool(
                spec(
                    "list_available_appointments",
                    "Lists workshop appointment slots that are still free.",
                    &[],
                    &[],
                ),
                Arc::new(move |_| {
                    let appointments = appointments.lock().unwrap();
                    let free: Vec<Value> = appointments
                        .as_array()
                        .expect("appointment seed is an array")
                        .iter()
                        .filter(|a| a["booked"] == false)
                        .map(|a| {
                            json!({
                                "appointment_id": a["appointment_id"],
                                "day": a["day"],
                                "date": a["date"],
                                "location": a["location"],
                            })
                        })
                        .collect();
                    Ok(json!({ "appointments": free }))
                }),
            )
            .expect("fixture tools are unique");
    }

    agent
        .register_tool(
            spec(
                "book_appointment",
                "Books a free appointment slot for the given reason.",
                &[("appointment_id", ParamType::String), ("reason", ParamType::String)],
                &["appointment_id", "reason"],
            ),
            Arc::new(move |input| {
                let id = input["appointment_id"].as_str().unwrap_or_default();
                let reason = input["reason"].as_str().unwrap_or_default();
                let mut appointments = appointments.lock().unwrap();
                let hit = appointments
                    .as_array_mut()
                    .expect("appointment seed is an array")
                    .iter_mut()
                    .find(|a| a["appointment_id"] == id);
                match hit {
                    Some(a) if a["booked"] == true => {
                        Err(format!("appointment {id:?} is already booked"))
                    }
                    Some(a) => {
                        a["booked"] = json!(true);
                        Ok(json!({
                            "booked": true,
                            "appointment_id": a["appointment_id"],
                            "day": a["day"],
                            "date": a["date"],
                            "reason": reason,
                        }))
                    }
                    None => Err(format!("no appointment with id {id:?}")),
                }
            }),
        )
        .expect("fixture tools are unique");

    agent
}

/// Incident diagnosis assistant over a small three-service system
/// (ingress, api, database) with architecture, logs and metrics.
pub fn diagnostic_agent() -> Agent {
    let architecture = seed(ARCHITECTURE);
    let logs = seed(LOGS);
    let metrics = seed(METRICS);

    let mut agent = Agent::new(AgentConfig::new(
        "You are an incident diagnosis assistant. Inspect the system \
         architecture first, then narrow down with logs and metrics before \
         naming a root cause.",
    ))
    .expect("fixture config is valid");

    agent
        .register_tool(
            spec(
                "get_architecture",
                "Returns the service topology: every service and its dependencies.",
                &[],
                &[],
            ),
            Arc::new(move |_| Ok(architecture.clone())),
        )
        .expect("fixture tools are unique");

    agent
        .register_tool(
            spec(
                "get_logs",
                "Returns the recent log lines of one service.",
                &[("service", ParamType::String)],
                &["service"],
            ),
            Arc::new(move |input| {
                let service = input["service"].as_str().unwrap_or_default();
                match logs.get(service) {
                    Some(lines) => Ok(json!({ "service": service, "lines": lines })),
                    None => Err(format!("unknown service {service:?}")),
                }
            }),
        )
        .expect("fixture tools are unique");

    agent
        .register_tool(
            spec(
                "get_metrics",
                "Returns the current request metrics of one service.",
                &[("service", ParamType::String)],
                &["service"],
            ),
            Arc::new(move |input| {
                let service = input["service"].as_str().unwrap_or_default();
                match metrics.get(service) {
                    Some(m) => Ok(json!({ "service": service, "metrics": m })),
                    None => Err(format!("unknown service {service:?}")),
                }
            }),
        )
        .expect("fixture tools are unique");

    agent
}

/// City event search with a fixed catalogue.
pub fn events_agent() -> Agent {
    let events = seed(EVENTS);

    let mut agent = Agent::new(AgentConfig::new(
        "You help users find local events. Always search before answering \
         and answer in the user's language.",
    ))
    .expect("fixture config is valid");

    agent
        .register_tool(
            spec(
                "search_events",
                "Searches upcoming events in the given city (English city name).",
                &[("city", ParamType::String)],
                &["city"],
            ),
            Arc::new(move |input| {
                let city = input["city"].as_str().unwrap_or_default();
                let found = events.get(city).cloned().unwrap_or_else(|| json!([]));
                Ok(json!({ "city": city, "events": found }))
            }),
        )
        .expect("fixture tools are unique");

    agent
}

/// Workshop knowledge base: substring retrieval over short manual
/// snippets, plus an ingestion tool.
pub fn knowledge_base_agent() -> Agent {
    let documents: Arc<Mutex<Vec<String>>> = Arc::new(Mutex::new(
        seed(KB)["documents"]
            .as_array()
            .expect("kb seed has documents")
            .iter()
            .map(|d| d.as_str().expect("kb documents are strings").to_string())
            .collect(),
    ));

    let mut agent = Agent::new(AgentConfig::new(
        "You answer vehicle manual questions. Query the knowledge base \
         before answering; cite the matching snippet.",
    ))
    .expect("fixture config is valid");

    {
        let documents = documents.clone();
        agent
            .register_tool(
                spec(
                    "query_knowledge_base",
                    "Returns the stored snippets containing the query (case-insensitive). \
                     An empty query matches nothing.",
                    &[("query", ParamType::String)],
                    &["query"],
                ),
                Arc::new(move |input| {
                    let query = input["query"].as_str().unwrap_or_default().to_lowercase();
                    if query.is_empty() {
                        return Ok(json!({ "matches": [] }));
                    }
                    let documents = documents.lock().unwrap();
                    let matches: Vec<&String> = documents
                        .iter()
                        .filter(|d| d.to_lowercase().contains(&query))
                        .collect();
                    Ok(json!({ "matches": matches }))
                }),
            )
            .expect("fixture tools are unique");
    }

    agent
        .register_tool(
            spec(
                "add_document",
                "Stores a new snippet in the knowledge base.",
                &[("text", ParamType::String)],
                &["text"],
            ),
            Arc::new(move |input| {
                let text = input["text"].as_str().unwrap_or_default();
                if text.is_empty() {
                    return Err("document text must be non-empty".to_string());
                }
                let mut documents = documents.lock().unwrap();
                documents.push(text.to_string());
                Ok(json!({ "added": true, "document_count": documents.len() }))
            }),
        )
        .expect("fixture tools are unique");

    agent
}

/// Personal assistant with an explicit key-value memory.
pub fn memory_agent() -> Agent {
    let store: Arc<Mutex<BTreeMap<String, String>>> = Arc::new(Mutex::new(BTreeMap::new()));

    let mut agent = Agent::new(AgentConfig::new(
        "You are a personal assistant. Persist facts the user tells you \
         with memory_write and recall them with memory_read instead of \
         guessing.",
    ))
    .expect("fixture config is valid");

    {
        let store = store.clone();
        agent
            .register_tool(
                spec(
                    "memory_write",
                    "Stores a value under a key, overwriting any previous value.",
                    &[("key", ParamType::String), ("value", ParamType::String)],
                    &["key", "value"],
                ),
                Arc::new(move |input| {
                    let key = input["key"].as_str().unwrap_or_default();
                    if key.is_empty() {
                        return Err("key must be non-empty".to_string());
                    }
                    let value = input["value"].as_str().unwrap_or_default();
                    store.lock().unwrap().insert(key.to_string(), value.to_string());
                    Ok(json!({ "stored": true, "key": key }))
                }),
            )
            .expect("fixture tools are unique");
    }

    agent
        .register_tool(
            spec(
                "memory_read",
                "Reads the value stored under a key.",
                &[("key", ParamType::String)],
                &["key"],
            ),
            Arc::new(move |input| {
                let key = input["key"].as_str().unwrap_or_default();
                Ok(match store.lock().unwrap().get(key) {
                    Some(value) => json!({ "found": true, "key": key, "value": value }),
                    None => json!({ "found": false, "key": key }),
                })
            }),
        )
        .expect("fixture tools are unique");

    agent
}
