// The entry form is generated from the catalog the API serves, never
// hard-coded, so catalog config changes need no console release.

import { esc } from "./html.js";
import type { ParameterDefinition, StudentRecordWire } from "./types.js";

export type InputType = "text" | "number" | "date" | "select" | "checkbox";

export interface FormField {
  key: string;
  label: string;
  area: string;
  oneTime: boolean;
  inputType: InputType;
  options: string[];
  unit: string | null;
  min: number | null;
  max: number | null;
  pattern: string | null;
  allowDetail: boolean;
  /** Pre-filled from the record: one-time value or latest observation. */
  value: string;
  /** One-time parameters already recorded render read-only. */
  locked: boolean;
}

export interface FormArea {
  area: string;
  fields: FormField[];
}

function inputTypeFor(definition: ParameterDefinition): InputType {
  switch (definition.kind.type) {
    case "decimal":
    case "integer":
      return "number";
    case "date":
      return "date";
    case "enumerated":
      return "select";
    case "boolean":
      return "checkbox";
    default:
      return "text"; // text, photo_ref, blood_group
  }
}

function currentValue(definition: ParameterDefinition, record: StudentRecordWire | null): string {
  if (!record) return "";
  const wire = definition.cardinality === "one_time"
    ? record.one_time_values[definition.key]
    : record.recent_observations[definition.key];
  if (!wire || wire.value === null) return "";
  return String(wire.value);
}

export function buildEntryForm(
  parameters: ParameterDefinition[],
  record: StudentRecordWire | null,
): FormField[] {
  return parameters.map((definition) => {
    const oneTime = definition.cardinality === "one_time";
    const value = currentValue(definition, record);
    return {
      key: definition.key,
      label: definition.display_name,
      area: definition.area,
      oneTime,
      inputType: inputTypeFor(definition),
      options: definition.kind.allowed,
      unit: definition.kind.unit,
      min: definition.constraints.min,
      max: definition.constraints.max,
      pattern: definition.constraints.pattern,
      allowDetail: definition.kind.allow_detail,
      value,
      locked: oneTime && value !== "",
    };
  });
}

/** Group fields by area, preserving catalog order of both areas and fields. */
export function groupByArea(fields: FormField[]): FormArea[] {
  const areas: FormArea[] = [];
  for (const field of fields) {
    const last = areas[areas.length - 1];
    if (last && last.area === field.area) {
      last.fields.push(field);
    } else {
      const existing = areas.find((a) => a.area === field.area);
      if (existing) existing.fields.push(field);
      else areas.push({ area: field.area, fields: [field] });
    }
  }
  return areas;
}

function inputMarkup(field: FormField): string {
  const disabled = field.locked ? " disabled" : "";
  const name = `name="${esc(field.key)}"`;
  if (field.inputType === "select") {
    const options = field.options
      .map((option) => {
        const selected = option === field.value ? " selected" : "";
        return `<option value="${esc(option)}"${selected}>${esc(option)}</option>`;
      })
      .join("");
    return `<select ${name} data-key="${esc(field.key)}"${disabled}>` +
      `<option value=""></option>${options}</select>`;
  }
  if (field.inputType === "checkbox") {
    const checked = field.value === "true" || field.value === "True" ? " checked" : "";
    return `<input type="checkbox" ${name} data-key="${esc(field.key)}"${checked}${disabled}>`;
  }
  const extras: string[] = [];
  if (field.inputType === "number") {
    extras.push('step="any"');
    if (field.min !== null) extras.push(`min="${field.min}"`);
    if (field.max !== null) extras.push(`max="${field.max}"`);
  }
  if (field.pattern) extras.push(`pattern="${esc(field.pattern)}"`);
  const extra = extras.length ? " " + extras.join(" ") : "";
  return `<input type="${field.inputType}" ${name} data-key="${esc(field.key)}" ` +
    `value="${esc(field.value)}"${extra}${disabled}>`;
}

/**
 * Render the grouped entry form. Locked fields carry the `locked` class and a
 * disabled input; `data-field` rows let inline API validation errors attach
 * to the offending field.
 */
export function renderEntryForm(fields: FormField[]): string {
  const sections = groupByArea(fields).map((section) => {
    const rows = section.fields
      .map((field) => {
        const unit = field.unit ? ` <span class="unit">${esc(field.unit)}</span>` : "";
        const lockNote = field.locked ? ' <span class="lock-note">recorded at admission</span>' : "";
        const detail = field.allowDetail
          ? `<input type="text" name="${esc(field.key)}__detail" class="detail" ` +
            `placeholder="detail" data-detail-for="${esc(field.key)}"${field.locked ? " disabled" : ""}>`
          : "";
        return `<div class="field${field.locked ? " locked" : ""}" data-field="${esc(field.key)}">` +
          `<label>${esc(field.label)}${unit}</label>` +
          inputMarkup(field) + detail +
          `<span class="field-error" data-error-for="${esc(field.key)}"></span>` +
          lockNote + `</div>`;
      })
      .join("\n");
    return `<fieldset data-area="${esc(section.area)}">` +
      `<legend>${esc(section.area)}</legend>\n${rows}\n</fieldset>`;
  });
  return sections.join("\n");
}
