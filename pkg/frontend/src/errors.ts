/*
 ConfigError marks problems the operator can fix without touching code (bad
 flags, bad sizes, unusable input layout). The CLI maps it to exit code 2,
 everything else to 1, matching the detector's convention.
*/

export class ConfigError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ConfigError';
  }
}
