/** Typed failures surfaced by the adapter. */

export class ServiceUnreachable extends Error {
  readonly code = "ServiceUnreachable";
}

export class Truncated extends Error {
  readonly code = "Truncated";
}

export class VocabMismatch extends Error {
  readonly code = "VocabMismatch";
}

/** An {"error": code} reply from the session service. */
export class ServiceError extends Error {
  constructor(readonly code: string) {
    super(`service answered error ${code}`);
  }
}
