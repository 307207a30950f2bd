#ifndef FPK_H
#define FPK_H

/* C interface to the solver workbench: opaque handles, integer status codes,
 * JSON strings for structured results. Every function returns a status code;
 * on anything but FPK_OK, fpk_last_error() holds a message for the calling
 * thread (valid until its next fpk_* call). Strings handed out through
 * char** outputs are owned by the caller and released with fpk_string_free.
 */

#ifdef __cplusplus
extern "C" {
#endif

enum {
    FPK_OK = 0,
    FPK_EPARSE = 1,   /* expression or config text failed to parse */
    FPK_EEVAL = 2,    /* expression evaluation left its domain */
    FPK_ECONFIG = 3,  /* bad or unknown config key, malformed value */
    FPK_EPRECOND = 4, /* operation preconditions not met */
    FPK_EINVAL = 5,   /* bad argument */
    FPK_EIO = 6,      /* filesystem trouble */
    FPK_ENUMERIC = 7, /* breakdown inside a numeric routine */
    FPK_EUNKNOWN = 8
};

typedef struct fpk_config fpk_config;

const char* fpk_version(void);

/* thread-local message describing the last failure on this thread */
const char* fpk_last_error(void);
void fpk_string_free(char* s);

int fpk_config_load(const char* path, fpk_config** out);
int fpk_config_loads(const char* text, fpk_config** out);
void fpk_config_free(fpk_config* cfg);
/* resolved configuration (defaults filled in) + source text + content hash */
int fpk_config_json(const fpk_config* cfg, char** json_out);

/* Samples the standing hypotheses over the exhaustion shells.
 * *ok_out = 1 iff no violations were found. */
int fpk_validate(const fpk_config* cfg, char** json_out, int* ok_out);

/* Runs the certificate checks requested in [lyapunov].
 * *all_hold_out = 1 iff every requested certificate holds. */
int fpk_check(const fpk_config* cfg, char** json_out, int* all_hold_out);

/* Solves the density evolution; writes density.csv, mass.csv, metadata.json
 * into out_dir (created if missing). *mass_ok_out = 1 iff the mass ledger
 * never shows creation of mass beyond the configured tolerance. */
int fpk_solve(const fpk_config* cfg, const char* out_dir, char** json_out, int* mass_ok_out);

/* Runs the particle oracle; writes mc.csv (and mc_hist.csv in 1-d) plus
 * metadata.json. Overrides <= 0 fall back to the config; has_seed = 0 with
 * no [mc] seed in the config is an error (runs must be reproducible). */
int fpk_mc(const fpk_config* cfg, const char* out_dir, long long n_paths_override,
           long long seed_override, int has_seed, int threads_override, char** json_out);

/* Compares a solve output directory against an mc output directory on the
 * shared grid and save schedule; writes compare.csv into out_dir. The L1
 * bound comes from the solve run's embedded tolerances.
 * *within_out = 1 iff every distance stays within the bound. */
int fpk_compare(const char* pde_dir, const char* mc_dir, const char* out_dir,
                char** json_out, int* within_out);

/* Long-run behavior: solves to t_end (<= 0: the config horizon), finds the
 * stationary density on the same stencil, writes ergodic.csv, stationary.csv,
 * metadata.json. */
int fpk_ergodic(const fpk_config* cfg, double t_end, const char* out_dir, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* FPK_H */
