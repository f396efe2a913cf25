//! OpenAPI description served at `/spec`.

use serde_json::{json, Value};

fn error_response(desc: &str) -> Value {
    json!({
        "description": desc,
        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}
    })
}

pub fn document() -> Value {
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "tempalign",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Implied-temperature alignment of portfolios with calibrated climate-model uncertainty."
        },
        "paths": {
            "/scenarios": {
                "get": {
                    "summary": "Scenario catalog",
                    "parameters": [{
                        "name": "schema", "in": "query", "required": false,
                        "schema": {"type": "string", "enum": ["multigas", "co2e"]}
                    }],
                    "responses": {
                        "200": {
                            "description": "Loaded scenarios",
                            "content": {"application/json": {"schema": {
                                "type": "array", "items": {"$ref": "#/components/schemas/ScenarioInfo"}
                            }}}
                        },
                        "400": error_response("Malformed query string")
                    }
                }
            },
            "/align": {
                "post": {
                    "summary": "Implied temperature of a portfolio under each scenario",
                    "requestBody": {"required": true, "content": {"application/json": {"schema": {"$ref": "#/components/schemas/AlignRequest"}}}},
                    "responses": {
                        "200": {"description": "Bands and summaries", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/AlignResponse"}}}},
                        "400": error_response("Malformed JSON"),
                        "404": error_response("Unknown chain"),
                        "409": error_response("No chain or emulator loaded"),
                        "422": error_response("Invalid portfolio or request; field-level messages in `problems`")
                    }
                }
            },
            "/calibrate": {
                "post": {
                    "summary": "Start a DRAM calibration job",
                    "requestBody": {"required": false, "content": {"application/json": {"schema": {"$ref": "#/components/schemas/CalibrateRequest"}}}},
                    "responses": {
                        "202": {"description": "Job accepted (or the existing job for the same configuration)", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobDescriptor"}}}},
                        "400": error_response("Malformed JSON"),
                        "422": error_response("Invalid configuration or priors")
                    }
                }
            },
            "/jobs": {
                "get": {
                    "summary": "All jobs",
                    "responses": {"200": {"description": "Jobs", "content": {"application/json": {"schema": {"type": "array", "items": {"$ref": "#/components/schemas/JobDescriptor"}}}}}}
                }
            },
            "/jobs/{id}": {
                "get": {
                    "summary": "Job status and result",
                    "parameters": [{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}],
                    "responses": {
                        "200": {"description": "Job", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/JobDescriptor"}}}},
                        "404": error_response("Unknown job")
                    }
                }
            },
            "/spec": {
                "get": {"summary": "This document", "responses": {"200": {"description": "OpenAPI document"}}}
            }
        },
        "components": {
            "schemas": {
                "Error": {
                    "type": "object",
                    "properties": {
                        "error": {"type": "string"},
                        "problems": {"type": "array", "items": {"type": "string"}}
                    }
                },
                "ScenarioInfo": {
                    "type": "object",
                    "properties": {
                        "id": {"type": "string"},
                        "schema": {"type": "string"},
                        "first_year": {"type": "integer"},
                        "last_year": {"type": "integer"},
                        "n_gases": {"type": "integer"},
                        "source": {"type": "string", "nullable": true}
                    }
                },
                "Constituent": {
                    "type": "object",
                    "required": ["name", "sector", "gva_musd"],
                    "properties": {
                        "name": {"type": "string"},
                        "sector": {"type": "string"},
                        "scope1_kt": {"type": "number"},
                        "scope2_kt": {"type": "number"},
                        "scope3_kt": {"type": "number"},
                        "gva_musd": {"type": "number"},
                        "reporting_year": {"type": "integer", "nullable": true}
                    }
                },
                "Portfolio": {
                    "type": "object",
                    "required": ["base_year", "constituents"],
                    "properties": {
                        "base_year": {"type": "integer"},
                        "constituents": {"type": "array", "items": {"$ref": "#/components/schemas/Constituent"}}
                    }
                },
                "EmissionUncertainty": {
                    "type": "object",
                    "properties": {
                        "family": {"type": "string", "enum": ["normal", "lognormal"]},
                        "mu": {"type": "number"},
                        "sigma": {"type": "number"},
                        "seed": {"type": "integer", "nullable": true}
                    }
                },
                "AlignRequest": {
                    "type": "object",
                    "required": ["portfolio"],
                    "properties": {
                        "portfolio": {"$ref": "#/components/schemas/Portfolio"},
                        "scenarios": {"type": "array", "items": {"type": "string"}},
                        "mode": {"type": "string", "enum": ["mcmc", "emulator"], "default": "mcmc"},
                        "uncertainty": {"$ref": "#/components/schemas/EmissionUncertainty"},
                        "seed": {"type": "integer", "default": 0},
                        "n": {"type": "integer", "default": 1000, "minimum": 100},
                        "scopes": {"type": "array", "items": {"type": "integer", "enum": [1, 2, 3]}},
                        "chain": {"type": "string", "description": "Chain id, `prior` or `fixed`; defaults to the latest chain"},
                        "benchmark": {"type": "object"},
                        "bands": {"type": "boolean", "default": true}
                    }
                },
                "AlignResponse": {
                    "type": "object",
                    "properties": {
                        "provenance": {"type": "object"},
                        "summary": {"type": "array", "items": {"type": "object", "properties": {
                            "scenario": {"type": "string"},
                            "year": {"type": "integer"},
                            "baseline_mean": {"type": "number"},
                            "portfolio_mean": {"type": "number"},
                            "delta": {"type": "number"}
                        }}},
                        "results": {"type": "array", "items": {"type": "object"}},
                        "warnings": {"type": "array", "items": {"type": "string"}}
                    }
                },
                "CalibrateRequest": {
                    "type": "object",
                    "properties": {
                        "iterations": {"type": "integer", "default": 10000, "minimum": 2000},
                        "seed": {"type": "integer", "default": 0},
                        "history": {"type": "string", "default": "SSP2-RCP4.5"},
                        "temperature_sd": {"type": "number"},
                        "co2_sd": {"type": "number"},
                        "priors": {"type": "object"}
                    }
                },
                "JobDescriptor": {
                    "type": "object",
                    "properties": {
                        "id": {"type": "string"},
                        "kind": {"type": "string"},
                        "status": {"type": "string", "enum": ["queued", "running", "done", "failed"]},
                        "progress": {"type": "number", "minimum": 0, "maximum": 1},
                        "config_hash": {"type": "string"},
                        "result": {"type": "object"},
                        "error": {"type": "string"}
                    }
                }
            }
        }
    })
}
