/**
 * Model parameter ranges, mirrored from the service so knobs can reject
 * bad values before a round trip.  The service remains the authority; this
 * is a convenience copy of the same bounds.
 */

export type PsiKind = "identity" | "log1p" | "power";

export interface PsiSpec {
  kind: PsiKind;
  gamma?: number;
}

export interface ModelParams {
  kappa: number;
  lambda: number;
  eta: number;
  theta: number;
  psi: PsiSpec;
}

export interface FieldProblem {
  path: string;
  message: string;
}

export type ParamUpdate = Partial<ModelParams>;

const PSI_KINDS: readonly string[] = ["identity", "log1p", "power"];

function finite(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

/** Validate a partial parameter update; empty result means acceptable. */
export function validateParamUpdate(updates: ParamUpdate, omega?: number): FieldProblem[] {
  const problems: FieldProblem[] = [];
  for (const key of Object.keys(updates)) {
    if (!["kappa", "lambda", "eta", "theta", "psi"].includes(key)) {
      problems.push({ path: `params.${key}`, message: "unknown field" });
    }
  }
  const { kappa, lambda, eta, theta, psi } = updates;
  if (kappa !== undefined && (!finite(kappa) || kappa < 0)) {
    problems.push({ path: "params.kappa", message: "must be >= 0" });
  }
  if (lambda !== undefined && (!finite(lambda) || lambda < 0 || lambda > 1)) {
    problems.push({ path: "params.lambda", message: "must be in [0, 1]" });
  }
  if (eta !== undefined && (!finite(eta) || eta < 0 || eta > 1)) {
    problems.push({ path: "params.eta", message: "must be in [0, 1]" });
  }
  if (theta !== undefined) {
    if (!finite(theta) || theta < 0) {
      problems.push({ path: "params.theta", message: "must be >= 0" });
    } else if (omega !== undefined && theta > omega / 100) {
      problems.push({
        path: "params.theta",
        message: `must be << total quantity (at most omega/100 = ${omega / 100})`,
      });
    }
  }
  if (psi !== undefined) {
    if (!psi || typeof psi !== "object" || !PSI_KINDS.includes(psi.kind)) {
      problems.push({ path: "params.psi.kind", message: `must be one of ${PSI_KINDS.join(", ")}` });
    } else if (psi.kind === "power") {
      if (!finite(psi.gamma) || (psi.gamma as number) <= 0) {
        problems.push({ path: "params.psi.gamma", message: "power measure requires gamma > 0" });
      }
    } else if (psi.gamma !== undefined) {
      problems.push({ path: "params.psi.gamma", message: `${psi.kind} takes no gamma` });
    }
  }
  return problems;
}
