from flask import Flask, jsonify
from routes.simulation_routes import simulation_bp
from config import Config, configure_logging

configure_logging()
Config.validate()

app = Flask(__name__)
app.config.from_object(Config)

app.register_blueprint(simulation_bp, url_prefix='/api')

@app.route('/health')
def health_check():
    """헬스 체크 엔드포인트"""
    return jsonify({'status': 'healthy', 'service': 'Lie Langevin API'}), 200

if __name__ == '__main__':
    app.run(debug=Config.DEBUG, host='0.0.0.0', port=5000)
