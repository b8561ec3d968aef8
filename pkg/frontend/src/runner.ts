/** Orchestrates one run against the service through the store's
 * single-in-flight gate. The integration tests drive this same path, so the
 * behavior they pin down is the behavior the UI gets.
 */

import { ApiClient, ServiceError } from "./api.js";
import type { ConsoleStore, RunRecord } from "./state.js";

/** Execute a run for the store's current frame and config mirror.
 *
 * Returns the completed record, or null when the run slot was busy, no
 * frame was loaded, or the service refused the request (the failure is
 * recorded in the store for the error banner).
 */
export async function executeRun(
  store: ConsoleStore,
  client: ApiClient,
): Promise<RunRecord | null> {
  if (!store.beginRun()) return null;
  let request;
  try {
    request = store.buildRunRequest();
  } catch (err) {
    store.failRun(0, String(err));
    return null;
  }
  try {
    const resp = await client.run(request);
    const annotations = await client.annotations(resp.run_id);
    const record: RunRecord = {
      runId: resp.run_id,
      report: resp.report,
      annotations,
    };
    store.completeRun(record);
    return record;
  } catch (err) {
    if (err instanceof ServiceError) store.failRun(err.status, err.detail);
    else store.failRun(0, err instanceof Error ? err.message : String(err));
    return null;
  }
}
