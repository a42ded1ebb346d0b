#ifndef BOWTIE_C_H
#define BOWTIE_C_H

/* C interface to the bow-tie tie-strength library. Handles are opaque and
 * single-threaded per handle; distinct handles are independent. Every
 * function that can fail returns a bt_status and leaves a message readable
 * through bt_last_error() on the calling thread. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Mirrors the CLI exit codes. */
typedef enum bt_status {
  BT_OK = 0,
  BT_ERROR_PARSE = 2,      /* unreadable or malformed input */
  BT_ERROR_VALIDATION = 3, /* well-formed input that breaks a precondition */
  BT_ERROR_NUMERIC = 4,    /* a solver failed to converge or degenerated */
  BT_ERROR_OTHER = 5
} bt_status;

/* Graph plus node-id map and (optionally) node attributes. */
typedef struct bt_graph bt_graph;

/* Per-edge feature rows tied to a graph's edge order. */
typedef struct bt_features bt_features;

const char* bt_version(void);

/* Message from the last failing call on this thread; "" before any failure.
 * The pointer stays valid until the next failing call on the same thread. */
const char* bt_last_error(void);

/* Frees strings returned through char** out parameters. NULL is a no-op. */
void bt_string_free(char* s);

/* kind selects the reader: "multiplex" (src,dst,layer records, weight =
 * number of distinct communication layers, layer_manifest_path maps layer
 * names to indices), "cdr" (daily call records, weight = summed call
 * minutes), "generic" (src,dst,weight rows). layer_manifest_path and
 * attributes_path may be NULL. */
bt_status bt_graph_load(const char* kind, const char* edges_path,
                        const char* layer_manifest_path,
                        const char* attributes_path, bt_graph** out);

size_t bt_graph_node_count(const bt_graph* g);
size_t bt_graph_edge_count(const bt_graph* g);

/* Drops ties within one household and ties with an unknown household on
 * either side. Requires loaded attributes. Counters may be NULL. */
bt_status bt_graph_filter_households(bt_graph* g, size_t* removed_same,
                                     size_t* removed_missing);

/* Removes dyads disconnected from the rest of the graph (both endpoints of
 * degree 1), iterated to a fixed point. removed_edges may be NULL. */
bt_status bt_graph_drop_isolated_dyads(bt_graph* g, size_t* removed_edges);

/* Writes nodemap.csv and edges.csv (dense ids, src < dst) under dir, plus
 * attributes.csv when attributes were loaded. provenance, when non-NULL, is
 * stamped into each file as a leading comment. */
bt_status bt_graph_write_canonical(const bt_graph* g, const char* dir,
                                   const char* provenance);

void bt_graph_free(bt_graph* g);

/* Decomposes every edge into its bow tie and evaluates the predictor columns.
 * threads = 0 means one thread per core. */
bt_status bt_features_compute(const bt_graph* g, unsigned threads,
                              bt_features** out);

size_t bt_features_row_count(const bt_features* f);

/* schema_path (column descriptions) and provenance may be NULL. */
bt_status bt_features_write_csv(const bt_features* f, const char* csv_path,
                                const char* schema_path,
                                const char* provenance);

void bt_features_free(bt_features* f);

/* Fills missing ages and sexes in g's attribute table with forests fitted on
 * the observed nodes' structural covariates. Observed values are never
 * changed. report_json_out, when non-NULL, receives the counts and held-out
 * scores; free it with bt_string_free. */
bt_status bt_impute_attributes(bt_graph* g, unsigned long long seed,
                               char** report_json_out);

/* Writes g's current (possibly imputed) attribute table as CSV. */
bt_status bt_graph_write_attributes(const bt_graph* g, const char* path,
                                    const char* provenance);

/* Runs the whole flow, ingest through report, from a JSON config (key set
 * documented in the README). Artifacts land under the config's output_dir;
 * report_json_out, when non-NULL, receives the evaluation report. */
bt_status bt_pipeline_run(const char* config_json, char** report_json_out);

/* Applies a saved model file to feature and target CSVs; rows with holes in
 * model columns are skipped. evaluation_json_out receives residual summaries,
 * the accuracy curve, and (for the classifier) the confusion table. */
bt_status bt_evaluate_model(const char* model_path, const char* features_csv,
                            const char* targets_csv,
                            char** evaluation_json_out);

/* Regenerates report.txt and the SVG/CSV plots under dir from report.json. */
bt_status bt_report_render(const char* report_json_path, const char* dir);

#ifdef __cplusplus
}
#endif

#endif
