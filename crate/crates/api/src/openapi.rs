use serde_json::{json, Value};

fn param(name: &str, description: &str, schema: Value, required: bool) -> Value {
    json!({ "name": name, "in": "query", "required": required, "description": description, "schema": schema })
}

fn string_enum(values: &[&str]) -> Value {
    json!({ "type": "string", "enum": values })
}

fn window_param() -> Value {
    param("window", "`all` or `<from>/<to>` in RFC 3339; defaults to all", json!({ "type": "string" }), false)
}

fn responses(ok: &str, errors: &[(&str, &str)]) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("200".into(), json!({ "description": ok }));
    for (code, why) in errors {
        out.insert((*code).into(), json!({ "description": why, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } } }));
    }
    Value::Object(out)
}

fn op(summary: &str, params: Vec<Value>, ok: &str, errors: &[(&str, &str)]) -> Value {
    json!({ "get": { "summary": summary, "parameters": params, "responses": responses(ok, errors) } })
}

pub fn openapi_document() -> Value {
    let bad = ("400", "unknown, repeated or malformed query parameter");
    json!({
        "openapi": "3.0.3",
        "info": { "title": "newsky", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/v1/prevalence": op(
                "Link counts or unreliable share per time bucket",
                vec![
                    param("mode", "absolute counts or relative ratio", string_enum(&["absolute", "relative"]), false),
                    param("granularity", "bucket size", string_enum(&["hour", "day"]), false),
                    param("from", "inclusive start, RFC 3339", json!({ "type": "string", "format": "date-time" }), true),
                    param("to", "exclusive end, RFC 3339", json!({ "type": "string", "format": "date-time" }), true),
                    param("kinds", "comma list of post, repost, like", json!({ "type": "string" }), false),
                    param("dedup", "count every link or one per event and domain", string_enum(&["per_link", "per_post"]), false),
                ],
                "array of buckets (absolute) or of {bucket_start, ratio} (relative)",
                &[bad, ("416", "range needs more buckets than the configured limit")],
            ),
            "/v1/domains/top": op(
                "Domains by share count",
                vec![
                    param("class", "reliability filter", string_enum(&["reliable", "unreliable", "all"]), false),
                    param("limit", "rows to return", json!({ "type": "integer", "minimum": 1, "maximum": 1000, "default": 10 }), false),
                    window_param(),
                ],
                "array of {rank, domain, frequency}",
                &[bad],
            ),
            "/v1/hashtag-graph": op(
                "Hashtag co-occurrence graph, reduced to its k-core",
                vec![
                    param("k", "core order; 0 returns the whole graph", json!({ "type": "integer", "minimum": 0, "default": 0 }), false),
                    window_param(),
                    param("mixed", "class of posts with both kinds of link", string_enum(&["unreliable", "reliable", "exclude"]), false),
                    param("min_cooccurrence", "drop edges seen in fewer posts", json!({ "type": "integer", "minimum": 1, "default": 1 }), false),
                ],
                "{k, k_max, nodes: [{tag, node_weight, degree}], edges: [{source, target, w_ut, w_t, weight}]}",
                &[bad],
            ),
            "/v1/audiences": op(
                "Communities of the engagement core with their distinctive terms",
                vec![window_param(), param("top_words", "terms per community", json!({ "type": "integer", "minimum": 0 }), false)],
                "{window, k_max, core_nodes, core_edges, modularity, communities}",
                &[bad, ("409", "the audience job has not been run for this window")],
            ),
            "/v1/orientation": op(
                "Share of rated links by source orientation and reliability",
                vec![window_param(), param("lang", "keep sources rated for this language", json!({ "type": "string" }), false)],
                "{rows: [{reliability, base, shares}], unknown}",
                &[bad],
            ),
            "/v1/health": op(
                "Ingest and store status",
                vec![],
                "{status, last_cursor, decode_errors, last_event_at, cursor_lag_seconds, observations, size_bytes, ratings_loaded}",
                &[],
            ),
            "/v1/openapi.json": op("This document", vec![], "OpenAPI 3 document", &[]),
        },
        "components": {
            "schemas": {
                "Error": { "type": "object", "properties": { "error": { "type": "string" } }, "required": ["error"] }
            }
        }
    })
}
