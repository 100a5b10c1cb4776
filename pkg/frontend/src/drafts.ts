// Resolution drafts and their submit-gating rules. The server is the final
// validator; this module exists so the submit button stays disabled until
// the payload would actually parse, and so a diff written against a stale
// artifact revision is refused before it can 422.

export type ResolutionKind =
  | 'patch-rtl'
  | 'replace-properties'
  | 'add-properties'
  | 'remove-properties'
  | 'waive-unreachable'
  | 'edit-spec'
  | 'abort';

export const RESOLUTION_KINDS: readonly ResolutionKind[] = [
  'patch-rtl',
  'replace-properties',
  'add-properties',
  'remove-properties',
  'waive-unreachable',
  'edit-spec',
  'abort',
];

export interface PropertyEdit {
  propertyId: string;
  bodyText: string;
}

export interface ResolutionDraft {
  kind: ResolutionKind;
  reviewer: string;
  /** null while the field is blank; the wire wants an integer >= 0. */
  effortMinutes: number | null;
  note: string;
  moduleName: string;
  diff: string;
  /** Revision the diff editor loaded as its base, null when no base shown. */
  diffBaseRevision: number | null;
  properties: PropertyEdit[];
  propertyIds: string[];
  waivedLocations: string[];
  specText: string;
}

export function emptyDraft(kind: ResolutionKind = 'abort'): ResolutionDraft {
  return {
    kind,
    reviewer: '',
    effortMinutes: null,
    note: '',
    moduleName: '',
    diff: '',
    diffBaseRevision: null,
    properties: [],
    propertyIds: [],
    waivedLocations: [],
    specText: '',
  };
}

export interface DraftContext {
  /** Latest accepted revision of a module, null when unknown. */
  currentRevision(moduleName: string): number | null;
}

const NO_CONTEXT: DraftContext = { currentRevision: () => null };

/**
 * Everything stopping this draft from being submittable. Mirrors the
 * server's wire validation so a rejected shape never leaves the editor,
 * plus one client-only rule: a patch drafted against a superseded
 * artifact revision is a conflict waiting to happen, so it is refused
 * here instead of round-tripping to a 422.
 */
export function draftProblems(draft: ResolutionDraft, ctx: DraftContext = NO_CONTEXT): string[] {
  const problems: string[] = [];
  if (!draft.reviewer.trim()) problems.push('reviewer is required');
  const minutes = draft.effortMinutes;
  if (minutes === null || !Number.isInteger(minutes) || minutes < 0) {
    problems.push('effort_minutes must be an integer >= 0');
  }
  switch (draft.kind) {
    case 'patch-rtl':
      if (!draft.moduleName.trim()) problems.push('patch-rtl names a module');
      if (!draft.diff.trim()) problems.push('patch-rtl carries a unified diff');
      if (draft.moduleName.trim() && draft.diffBaseRevision !== null) {
        const current = ctx.currentRevision(draft.moduleName.trim());
        if (current !== null && current !== draft.diffBaseRevision) {
          problems.push(
            `diff is based on revision ${draft.diffBaseRevision} but ` +
              `${draft.moduleName.trim()} is now at revision ${current}; reload the base`,
          );
        }
      }
      break;
    case 'replace-properties':
    case 'add-properties':
      if (draft.properties.length === 0) {
        problems.push('at least one property is required');
      } else {
        draft.properties.forEach((p, i) => {
          if (!p.propertyId.trim() || !p.bodyText.trim()) {
            problems.push(`property ${i + 1} needs an id and a body`);
          }
        });
      }
      break;
    case 'remove-properties':
      if (draft.propertyIds.length === 0 || draft.propertyIds.some((x) => !x.trim())) {
        problems.push('a non-empty list of property ids is required');
      }
      break;
    case 'waive-unreachable':
      if (draft.waivedLocations.length === 0 || draft.waivedLocations.some((x) => !x.trim())) {
        problems.push('a non-empty list of locations is required');
      }
      break;
    case 'edit-spec':
      if (!draft.specText.trim()) problems.push('edit-spec carries the new text');
      break;
    case 'abort':
      break;
  }
  return problems;
}

/** Flat wire shape the resolution endpoint expects. */
export function toWire(draft: ResolutionDraft): Record<string, unknown> {
  const wire: Record<string, unknown> = {
    kind: draft.kind,
    reviewer: draft.reviewer.trim(),
    effort_minutes: draft.effortMinutes ?? 0,
  };
  if (draft.note.trim()) wire.note = draft.note.trim();
  switch (draft.kind) {
    case 'patch-rtl':
      wire.module_name = draft.moduleName.trim();
      wire.diff = draft.diff;
      break;
    case 'replace-properties':
    case 'add-properties':
      wire.properties = draft.properties.map((p) => ({
        property_id: p.propertyId.trim(),
        body_text: p.bodyText.trim(),
      }));
      break;
    case 'remove-properties':
      wire.property_ids = draft.propertyIds.map((x) => x.trim());
      break;
    case 'waive-unreachable':
      wire.waived_locations = draft.waivedLocations.map((x) => x.trim());
      break;
    case 'edit-spec':
      wire.spec_text = draft.specText;
      break;
    case 'abort':
      break;
  }
  return wire;
}

/** Parse the comma/newline separated id list the editor's textarea holds. */
export function splitIdList(text: string): string[] {
  return text
    .split(/[,\n]/)
    .map((x) => x.trim())
    .filter((x) => x.length > 0);
}
