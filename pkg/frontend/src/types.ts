// Wire types mirroring /api/v1 responses. The console never computes
// clinical results locally; these are display shapes only.

export type Role = "admin" | "nurse" | "doctor" | "student";

export interface ParameterKind {
  type: string;
  unit: string | null;
  allowed: string[];
  allow_detail: boolean;
}

export interface ParameterConstraints {
  min: number | null;
  max: number | null;
  pattern: string | null;
}

export interface ParameterDefinition {
  key: string;
  display_name: string;
  area: string;
  cardinality: "one_time" | "multiple_time";
  kind: ParameterKind;
  constraints: ParameterConstraints;
}

export interface CatalogResponse {
  catalog_version: string;
  parameters: ParameterDefinition[];
}

export interface WireValue {
  value: string | number | boolean | null;
  detail: string | null;
  camp_year: number | null;
  recorded_at: string;
  recorded_by: string;
}

export interface DoseWire {
  vaccine_code: string;
  dose_number: number;
  given_on: string;
}

export interface PerDoseWire {
  vaccine_code: string;
  dose_number: number;
  state: string;
  due_on: string;
}

export interface ImmunizationWire {
  overall: string;
  counts: Record<string, number>;
  per_dose: PerDoseWire[];
}

export interface FindingWire {
  rule_id: string;
  parameter_key: string;
  observed: string;
  verdict: "Pass" | "Warn" | "Fail";
  disease_hints: string[];
  message: string;
}

export interface ReferralWire {
  referral_id: string;
  screening_id: string;
  created_at: string;
  status: "Open" | "Seen" | "Closed";
  doctor_notes: string | null;
  failed_findings: FindingWire[];
}

export interface StudentRecordWire {
  screening_id: string;
  rfid_token: string;
  one_time_values: Record<string, WireValue>;
  recent_observations: Record<string, WireValue>;
  old_observations?: Record<string, WireValue[]>;
  doses: DoseWire[];
  immunization: ImmunizationWire | null;
  referrals: ReferralWire[];
}

export interface LoginResponse {
  token: string;
  role: Role;
  display_name: string;
  screening_id: string | null;
  expires_at: string;
}

export interface SearchResult {
  screening_id: string;
  student_name: string;
}

export interface ScreenResponse {
  findings: FindingWire[];
  referral: ReferralWire | null;
}

export interface MinimalViewWire {
  screening_id: string;
  student_name: string;
  present_class: string | null;
  height_cm: number | null;
  weight_kg: number | null;
  bmi: string | null;
  immunization: string | null;
  notices: string[];
}

export interface StaffWire {
  principal_id: string;
  username: string;
  display_name: string;
  role: Role;
  screening_id: string | null;
}
