import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";
import type {
  ParameterDefinition,
  StudentRecordWire,
  WireValue,
} from "../src/types.js";

const HERE = dirname(fileURLToPath(import.meta.url));

/**
 * The catalog actually shipped with the records service, normalized to the
 * shape GET /catalog serves (the API fills in kind/constraint defaults).
 */
export function shippedCatalog(): ParameterDefinition[] {
  const path = join(HERE, "..", "..", "src", "hmms", "data", "catalog.json");
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  return raw.parameters.map((p: any): ParameterDefinition => ({
    key: p.key,
    display_name: p.display_name,
    area: p.area,
    cardinality: p.cardinality,
    kind: {
      type: p.kind.type,
      unit: p.kind.unit ?? null,
      allowed: p.kind.allowed ?? [],
      allow_detail: p.kind.allow_detail ?? false,
    },
    constraints: {
      min: p.constraints?.min ?? null,
      max: p.constraints?.max ?? null,
      pattern: p.constraints?.pattern ?? null,
    },
  }));
}

export function wireValue(value: string | number | boolean, campYear: number | null = null): WireValue {
  return {
    value,
    detail: null,
    camp_year: campYear,
    recorded_at: "2024-06-01T09:00:00+00:00",
    recorded_by: "nurse",
  };
}

export function sampleRecord(overrides: Partial<StudentRecordWire> = {}): StudentRecordWire {
  return {
    screening_id: "S-1",
    rfid_token: "CARD-1",
    one_time_values: {
      student_name: wireValue("Asha Rahman"),
      screening_id: wireValue("S-1"),
      date_of_birth: wireValue("2014-09-01"),
    },
    recent_observations: {
      height: wireValue(123.5, 2024),
      weight: wireValue(24, 2024),
    },
    doses: [{ vaccine_code: "BCG", dose_number: 1, given_on: "2014-09-08" }],
    immunization: { overall: "Incomplete", counts: { Given: 1, Overdue: 13, Pending: 0 }, per_dose: [] },
    referrals: [],
    ...overrides,
  };
}

export interface RouteHandler {
  status: number;
  body: unknown;
}

export interface RecordedCall {
  method: string;
  url: string;
  headers: Record<string, string>;
  body: unknown;
}

/** Tiny fetch stub keyed by "METHOD path"; records every call it serves. */
export function fakeFetch(
  routes: Record<string, RouteHandler | ((call: RecordedCall) => RouteHandler)>,
): { fetchFn: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const call: RecordedCall = {
      method,
      url,
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    };
    calls.push(call);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const handler = routes[`${method} ${path}`];
    if (!handler) {
      return new Response(JSON.stringify({
        api_version: "1",
        error: { code: "not_found", message: `no stub for ${method} ${path}`, details: {} },
      }), { status: 404, headers: { "Content-Type": "application/json" } });
    }
    const result = typeof handler === "function" ? handler(call) : handler;
    return new Response(JSON.stringify(result.body), {
      status: result.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchFn, calls };
}
